"""Real-time k-representative queries over a sliding window of a social stream."""

from .core import Element, QueryVector, ScoringConfig, TopicModel, infer_query_vector, validate_element
from .engines import Query, QueryResult, query_mttd, query_mtts
from .service import StreamEngine

__all__ = [
    "Element", "QueryVector", "ScoringConfig", "TopicModel", "infer_query_vector",
    "validate_element", "Query", "QueryResult", "query_mtts", "query_mttd", "StreamEngine",
]
