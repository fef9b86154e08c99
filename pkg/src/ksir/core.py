"""Domain types, record validation, the topic-model oracle and query vectors.

Elements arrive as line-delimited JSON records::

    {"id": 7, "ts": 7, "words": [[3, 1], [10, 1]], "refs": [2], "topics": [[0, 0.33], [1, 0.67]]}

``topics`` is optional; when absent the topic vector is folded from the
element's words through the topic model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import (
    BadReference,
    InvalidProbability,
    InvalidQuery,
    MalformedRecord,
    NoTopicMass,
)

PROB_TOL = 1e-6
RENORM_TOL = 1e-3
ROW_TOL = 1e-4
WORD_FLOOR = 1e-8
QUERY_FLOOR = 1e-6


@dataclass(frozen=True)
class Element:
    id: int
    ts: int
    words: Mapping[int, int]
    refs: tuple[int, ...] = ()
    topics: Mapping[int, float] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "ts": self.ts,
            "words": [[w, f] for w, f in self.words.items()],
            "refs": list(self.refs),
            "topics": [[i, p] for i, p in self.topics.items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))


@dataclass(frozen=True)
class ScoringConfig:
    lam: float = 0.5
    eta: float = 1.0
    window_len: int = 1
    bucket_len: int = 1

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not (self.window_len >= self.bucket_len >= 1):
            raise ValueError("need window_len >= bucket_len >= 1")
        if self.window_len % self.bucket_len:
            raise ValueError("bucket_len must divide window_len")

    @property
    def infl_weight(self) -> float:
        return (1.0 - self.lam) / self.eta


class TopicModel:
    """Sparse topic-word distributions, read-only after construction.

    ``rows[i]`` maps word-id to p_i(w). ``by_word[w]`` is the transposed view
    used for folding keywords into topic space.
    """

    def __init__(self, z: int, m: int, rows: list[dict[int, float]]):
        if len(rows) != z:
            raise ValueError(f"expected {z} topic rows, got {len(rows)}")
        self.z = z
        self.m = m
        self.rows = rows
        by_word: dict[int, list[tuple[int, float]]] = {}
        for i, row in enumerate(rows):
            total = 0.0
            for w, p in row.items():
                if not 0.0 <= p <= 1.0:
                    raise InvalidProbability(f"p_{i}(w{w}) = {p} outside [0, 1]")
                if not 0 <= w < m:
                    raise ValueError(f"word id {w} outside vocabulary of size {m}")
                total += p
                by_word.setdefault(w, []).append((i, p))
            # rows may omit words below the storage floor
            if not (1.0 - ROW_TOL - m * WORD_FLOOR <= total <= 1.0 + ROW_TOL):
                raise InvalidProbability(f"topic {i} sums to {total:.6f}")
        self.by_word = by_word

    def prob(self, i: int, w: int) -> float:
        return self.rows[i].get(w, 0.0)

    @classmethod
    def load(cls, path: str | Path) -> "TopicModel":
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise MalformedRecord(f"{path}: header must be 'z m'")
            z, m = int(header[0]), int(header[1])
            rows: list[dict[int, float]] = [{} for _ in range(z)]
            for lineno, line in enumerate(fh, start=2):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 3:
                    raise MalformedRecord(f"{path}:{lineno}: expected 'topic word prob'")
                i, w, p = int(parts[0]), int(parts[1]), float(parts[2])
                if p < WORD_FLOOR:
                    continue
                rows[i][w] = p
        return cls(z, m, rows)

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write(f"{self.z} {self.m}\n")
            for i, row in enumerate(self.rows):
                for w in sorted(row):
                    fh.write(f"{i} {w} {row[w]!r}\n")


@dataclass(frozen=True)
class QueryVector:
    entries: Mapping[int, float]

    def __post_init__(self):
        if not self.entries:
            raise InvalidQuery("query vector has no non-zero entry")
        for i, x in self.entries.items():
            if not 0.0 < x <= 1.0:
                raise InvalidQuery(f"x_{i} = {x} outside (0, 1]")
        total = math.fsum(self.entries.values())
        if abs(total - 1.0) > 1e-9:
            raise InvalidQuery(f"query vector sums to {total}, not 1")

    @property
    def d(self) -> int:
        return len(self.entries)

    @classmethod
    def from_weights(cls, weights: Mapping[int, float] | Iterable[float]) -> "QueryVector":
        """Normalize arbitrary non-negative weights; zeros are dropped."""
        if not isinstance(weights, Mapping):
            weights = dict(enumerate(weights))
        if any(v < 0 for v in weights.values()):
            raise InvalidQuery("query weights must be non-negative")
        total = math.fsum(weights.values())
        if total <= 0:
            raise InvalidQuery("query weights sum to zero")
        return cls({i: v / total for i, v in sorted(weights.items()) if v > 0})


def fold_topics(weighted_words: Mapping[int, float], model: TopicModel) -> dict[int, float]:
    """Additive folding: mass on topic i is sum of weight(w) * p_i(w), normalized.

    Entries under QUERY_FLOOR after normalization are dropped and the rest
    renormalized. Raises NoTopicMass when no word carries probability anywhere.
    """
    mass: dict[int, float] = {}
    for w, c in weighted_words.items():
        for i, p in model.by_word.get(w, ()):
            mass[i] = mass.get(i, 0.0) + c * p
    total = math.fsum(mass.values())
    if total <= 0.0:
        raise NoTopicMass(f"words {sorted(weighted_words)} carry no topic probability")
    kept = {i: v / total for i, v in mass.items() if v / total >= QUERY_FLOOR}
    norm = math.fsum(kept.values())
    return {i: kept[i] / norm for i in sorted(kept)}


def infer_query_vector(keywords: list[int], model: TopicModel) -> QueryVector:
    if not keywords:
        raise InvalidQuery("at least one keyword is required")
    counts: dict[int, float] = {}
    for w in keywords:
        counts[w] = counts.get(w, 0.0) + 1.0
    return QueryVector(fold_topics(counts, model))


def _pairs(raw, name: str) -> list[tuple]:
    try:
        return [(a, b) for a, b in raw]
    except (TypeError, ValueError):
        raise MalformedRecord(f"field {name!r} must be a list of pairs") from None


def validate_element(raw: Mapping, model: TopicModel | None = None) -> Element:
    """Turn a decoded ingestion record into an Element or raise."""
    if not isinstance(raw, Mapping):
        raise MalformedRecord("record must be an object")
    for key in ("id", "ts", "words"):
        if key not in raw:
            raise MalformedRecord(f"missing field {key!r}")
    eid, ts = raw["id"], raw["ts"]
    if not isinstance(eid, int) or isinstance(eid, bool):
        raise MalformedRecord(f"id must be an integer, got {eid!r}")
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise MalformedRecord(f"ts must be an integer, got {ts!r}")

    words: dict[int, int] = {}
    for w, f in _pairs(raw["words"], "words"):
        if not isinstance(w, int) or not isinstance(f, int) or f < 1:
            raise MalformedRecord(f"element {eid}: bad word entry [{w!r}, {f!r}]")
        if w in words:
            raise MalformedRecord(f"element {eid}: word {w} listed twice")
        words[w] = f

    refs = raw.get("refs") or []
    if not all(isinstance(r, int) for r in refs):
        raise MalformedRecord(f"element {eid}: refs must be integers")
    if eid in refs:
        raise BadReference(f"element {eid} refers to itself")
    refs = tuple(dict.fromkeys(refs))

    raw_topics = raw.get("topics")
    if raw_topics is None:
        if model is None:
            raise MalformedRecord(f"element {eid}: no topics and no model to infer them")
        try:
            topics = fold_topics(words, model)
        except NoTopicMass as exc:
            raise InvalidProbability(f"element {eid}: {exc}") from None
    else:
        topics = {}
        for i, p in _pairs(raw_topics, "topics"):
            if not isinstance(i, int) or not isinstance(p, (int, float)) or isinstance(p, bool):
                raise MalformedRecord(f"element {eid}: bad topic entry [{i!r}, {p!r}]")
            if not 0.0 <= p <= 1.0:
                raise InvalidProbability(f"element {eid}: p_{i}(e) = {p} outside [0, 1]")
            if model is not None and not 0 <= i < model.z:
                raise MalformedRecord(f"element {eid}: topic {i} outside model")
            if p > 0:
                topics[i] = topics.get(i, 0.0) + float(p)
        total = math.fsum(topics.values())
        drift = abs(total - 1.0)
        if drift > RENORM_TOL:
            raise InvalidProbability(f"element {eid}: topic probabilities sum to {total}")
        if drift > PROB_TOL:
            topics = {i: p / total for i, p in topics.items()}
    return Element(eid, ts, words, refs, topics)


def read_records(path: str | Path) -> Iterator[dict]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"{path}:{lineno}: {exc.msg}") from None


def load_stream(path: str | Path, model: TopicModel | None = None) -> list[Element]:
    return [validate_element(raw, model) for raw in read_records(path)]


def load_dictionary(path: str | Path) -> dict[str, int]:
    """Map surface form to word id from a ``word_id surface_form`` sidecar."""
    vocab: dict[str, int] = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split(maxsplit=1)
            if len(parts) == 2:
                vocab[parts[1].strip()] = int(parts[0])
    return vocab
