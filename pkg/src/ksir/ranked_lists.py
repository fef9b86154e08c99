"""Per-topic ranked lists of single-element scores delta_i(e), kept exact.

Each list orders its tuples by (delta descending, element id ascending), so
repositioning after a score change is a delete followed by an insert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from sortedcontainers import SortedList

from .core import QueryVector
from .scoring import Scorer
from .window import ActiveStore, Snapshot, UpdateReport


class RankedList:
    def __init__(self, topic: int):
        self.topic = topic
        self.entries = SortedList()
        self.lookup: dict[int, float] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        """Yields (element id, delta) in non-increasing delta order."""
        for neg, eid in self.entries:
            yield eid, -neg

    def upsert(self, eid: int, delta: float) -> None:
        old = self.lookup.get(eid)
        if old is not None:
            if old == delta:
                return
            self.entries.remove((-old, eid))
        self.entries.add((-delta, eid))
        self.lookup[eid] = delta

    def discard(self, eid: int) -> None:
        old = self.lookup.pop(eid, None)
        if old is not None:
            self.entries.remove((-old, eid))

    def head(self) -> tuple[int, float] | None:
        if not self.entries:
            return None
        neg, eid = self.entries[0]
        return eid, -neg


class RankedIndex:
    """The family RL_1..RL_z plus the update rule that keeps them exact."""

    def __init__(self, scorer: Scorer):
        self.scorer = scorer
        self.lists: dict[int, RankedList] = {}

    def list_for(self, i: int) -> RankedList:
        rl = self.lists.get(i)
        if rl is None:
            rl = self.lists[i] = RankedList(i)
        return rl

    def topic_delta(self, store: ActiveStore, eid: int, i: int) -> float:
        e = store.elements[eid]
        pe = e.topics[i]
        mass = store.infl_mass.get(eid)
        infl = pe * mass.get(i, 0.0) if mass else 0.0
        cfg = self.scorer.cfg
        return cfg.lam * self.scorer.semantic(e, i) + cfg.infl_weight * infl

    def _refresh(self, store: ActiveStore, eid: int) -> None:
        for i, p in store.elements[eid].topics.items():
            if p > 0.0:
                self.list_for(i).upsert(eid, self.topic_delta(store, eid, i))

    def apply_update(self, report: UpdateReport, store: ActiveStore) -> None:
        for eid in report.evicted:
            e = store.archive[eid]
            for i in e.topics:
                rl = self.lists.get(i)
                if rl is not None:
                    rl.discard(eid)
            self.scorer.forget(eid)
        fresh = set(report.inserted)
        fresh.update(report.revived)
        fresh.update(report.changed)
        for eid in sorted(fresh):
            if eid in store.elements:
                self._refresh(store, eid)

    def delta(self, eid: int, x: QueryVector) -> float:
        """delta(e, x) assembled from the stored topic-wise scores."""
        total = 0.0
        for i, xi in x.entries.items():
            rl = self.lists.get(i)
            if rl is not None:
                d = rl.lookup.get(eid)
                if d is not None:
                    total += xi * d
        return total

    def tuples(self, eid: int) -> dict[int, float]:
        return {i: rl.lookup[eid] for i, rl in self.lists.items() if eid in rl.lookup}


class TraversalCursor:
    """Query-local walk over the lists of the topics with x_i > 0.

    Each element is yielded at most once across all lists; heads skip
    elements already yielded from another list.
    """

    def __init__(self, index: RankedIndex, x: QueryVector):
        self.visited: set[int] = set()
        self._heads: dict[int, tuple[int, float] | None] = {}
        self._iters = {}
        self._weights = {}
        for i, xi in sorted(x.entries.items()):
            rl = index.lists.get(i)
            if rl is not None and len(rl):
                self._iters[i] = iter(rl)
                self._weights[i] = xi
                self._advance(i)

    def _advance(self, i: int) -> None:
        it = self._iters[i]
        for eid, delta in it:
            if eid not in self.visited:
                self._heads[i] = (eid, delta)
                return
        self._heads[i] = None

    def _head(self, i: int) -> tuple[int, float] | None:
        h = self._heads[i]
        if h is not None and h[0] in self.visited:
            self._advance(i)
            h = self._heads[i]
        return h

    @property
    def exhausted(self) -> bool:
        return all(self._head(i) is None for i in self._iters)

    def upper_bound(self) -> float:
        """UB(x): no unvisited element can score above sum_i x_i * delta_i(head_i)."""
        ub = 0.0
        for i, xi in self._weights.items():
            h = self._head(i)
            if h is not None:
                ub += xi * h[1]
        return ub

    def next(self) -> tuple[int, int] | None:
        """Yield (element id, topic) of the head maximizing x_i * delta_i(head)."""
        best = None
        for i, xi in self._weights.items():
            h = self._head(i)
            if h is None:
                continue
            key = (-xi * h[1], h[0], i)
            if best is None or key < best:
                best = key
        if best is None:
            return None
        _, eid, i = best
        self.visited.add(eid)
        self._advance(i)
        return eid, i


@dataclass
class IntegrityReport:
    checked: int = 0
    max_drift: float = 0.0
    missing: list[tuple[int, int]] = field(default_factory=list)
    extra: list[tuple[int, int]] = field(default_factory=list)
    order_violations: list[tuple[int, int]] = field(default_factory=list)
    drifted: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing or self.extra or self.order_violations or self.drifted)


def integrity_check(index: RankedIndex, snapshot: Snapshot, tol: float = 1e-9) -> IntegrityReport:
    """Recompute every delta_i from the reverse-reference sets and compare."""
    report = IntegrityReport()
    scorer = index.scorer
    expected: dict[tuple[int, int], float] = {}
    for eid in snapshot.active_ids():
        e = snapshot.element(eid)
        for i, p in e.topics.items():
            if p > 0.0:
                expected[(i, eid)] = scorer.topic_delta(e, i, snapshot)
    for i, rl in index.lists.items():
        prev = math.inf
        for eid, delta in rl:
            if delta > prev:
                report.order_violations.append((i, eid))
            prev = delta
            if rl.lookup.get(eid) != delta:
                report.order_violations.append((i, eid))
            want = expected.pop((i, eid), None)
            if want is None:
                report.extra.append((i, eid))
                continue
            report.checked += 1
            drift = abs(want - delta)
            report.max_drift = max(report.max_drift, drift)
            if drift > tol:
                report.drifted.append((i, eid, drift))
    report.missing.extend(sorted(expected))
    return report
