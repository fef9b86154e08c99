"""Exception hierarchy shared by every layer of the engine."""


class KsirError(Exception):
    """Base class. ``code`` is the short label surfaced by the CLI and the API."""

    code = "error"


class MalformedRecord(KsirError):
    code = "malformed_record"


class InvalidProbability(KsirError):
    code = "invalid_probability"


class BadReference(KsirError):
    code = "bad_reference"


class NoTopicMass(KsirError):
    code = "no_topic_mass"


class InvalidQuery(KsirError):
    code = "invalid_query"


class OutOfOrderBucket(KsirError):
    code = "out_of_order_bucket"


class DuplicateId(KsirError):
    code = "duplicate_id"


class StaleSnapshot(KsirError):
    code = "stale_snapshot"


class TooLarge(KsirError):
    code = "too_large"
