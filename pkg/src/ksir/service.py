"""Long-lived engine state: the active store, its ranked lists and the query entry point.

One writer (bucket ingestion) and many readers (queries) share a
:class:`StreamEngine`; a readers-writer lock keeps ingestion from interleaving
with running queries.
"""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable

from .baselines import ENGINES
from .core import Element, QueryVector, ScoringConfig, TopicModel, infer_query_vector
from .engines import Query, QueryResult
from .errors import InvalidQuery
from .ranked_lists import IntegrityReport, RankedIndex, integrity_check
from .scoring import Scorer
from .window import ActiveStore, Snapshot, UpdateReport


class RWLock:
    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writing = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writing:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writing or self._readers:
                self._cond.wait()
            self._writing = True
        try:
            yield
        finally:
            with self._cond:
                self._writing = False
                self._cond.notify_all()


@dataclass
class BucketStats:
    now: int
    inserted: int
    evicted: int
    seconds: float


class StreamEngine:
    def __init__(self, model: TopicModel, cfg: ScoringConfig, start: int = 0):
        self.model = model
        self.cfg = cfg
        self.scorer = Scorer(model, cfg)
        self.store = ActiveStore(cfg, start)
        self.index = RankedIndex(self.scorer)
        self.lock = RWLock()
        self.history: list[BucketStats] = []

    @property
    def now(self) -> int:
        return self.store.now

    def bucket_end(self, ts: int) -> int:
        """The update time whose bucket holds timestamp ``ts``."""
        L = self.cfg.bucket_len
        start = self.store.now % L
        return start + -(-(ts - start) // L) * L

    def _apply(self, bucket: list[Element]) -> UpdateReport:
        began = time.perf_counter()
        report = self.store.ingest_bucket(bucket)
        self.index.apply_update(report, self.store)
        self.history.append(BucketStats(report.now, len(report.inserted), len(report.evicted),
                                        time.perf_counter() - began))
        return report

    def ingest_bucket(self, bucket: Iterable[Element]) -> UpdateReport:
        with self.lock.write():
            return self._apply(list(bucket))

    def ingest(self, elements: Iterable[Element], until: int | None = None) -> list[UpdateReport]:
        """Feed time-ordered elements, cutting them into buckets of length L.

        Stops after the bucket ending at ``until`` when given; elements past it
        are rejected rather than silently held back.
        """
        reports: list[UpdateReport] = []
        pending: list[Element] = []
        with self.lock.write():
            for e in elements:
                end = self.bucket_end(e.ts)
                if until is not None and end > until:
                    raise InvalidQuery(f"element {e.id} at ts={e.ts} lies past t={until}")
                while self.store.now + self.cfg.bucket_len < end:
                    reports.append(self._apply(pending))
                    pending = []
                pending.append(e)
            if pending:
                reports.append(self._apply(pending))
            if until is not None:
                while self.store.now < until:
                    reports.append(self._apply([]))
        return reports

    def advance_to(self, t: int) -> list[UpdateReport]:
        return self.ingest((), until=t)

    def snapshot(self) -> Snapshot:
        return self.store.snapshot()

    def make_query(self, k: int, epsilon: float = 0.1, *, vector: Iterable[float] | dict | None = None,
                   keywords: list[int] | None = None, t: int | None = None) -> Query:
        if (vector is None) == (keywords is None):
            raise InvalidQuery("give exactly one of a topic vector or keywords")
        if vector is not None:
            x = QueryVector.from_weights(vector)
            if any(i >= self.model.z for i in x.entries):
                raise InvalidQuery(f"query vector has more than z={self.model.z} topics")
        else:
            x = infer_query_vector(keywords, self.model)
        return Query(k, x, epsilon, t)

    @staticmethod
    def _runner(engine: str):
        try:
            return ENGINES[engine]
        except KeyError:
            raise InvalidQuery(f"unknown engine {engine!r}; pick one of {sorted(ENGINES)}") from None

    def query(self, q: Query, engine: str = "mttd", trace: bool = False) -> QueryResult:
        run = self._runner(engine)
        with self.lock.read():
            return run(q, self.snapshot(), self.index, self.scorer, trace=trace)

    def query_many(self, q: Query, engines: Iterable[str]) -> dict[str, QueryResult]:
        """Run several engines on one snapshot."""
        runs = {name: self._runner(name) for name in engines}
        with self.lock.read():
            snap = self.snapshot()
            return {name: run(q, snap, self.index, self.scorer) for name, run in runs.items()}

    def check(self) -> IntegrityReport:
        with self.lock.read():
            return integrity_check(self.index, self.snapshot())

    def stats(self) -> dict:
        with self.lock.read():
            per_element = [b.seconds / b.inserted for b in self.history if b.inserted]
            return {
                "now": self.store.now,
                "lam": self.cfg.lam,
                "eta": self.cfg.eta,
                "window_len": self.cfg.window_len,
                "bucket_len": self.cfg.bucket_len,
                "n_active": len(self.store.elements),
                "n_window": len(self.store.window_ids),
                "buckets": len(self.history),
                "dangling_refs": self.store.dangling,
                "mean_update_seconds_per_element":
                    sum(b.seconds for b in self.history) / max(1, sum(b.inserted for b in self.history)),
                "max_bucket_seconds_per_element": max(per_element, default=0.0),
            }
