"""Ranked-list driven query processors with early termination.

``query_mtts`` runs one pass with a geometric family of threshold candidates
and is (1/2 - eps)-approximate. ``query_mttd`` keeps a single candidate and
lowers its threshold over rounds, re-evaluating buffered elements; it is
(1 - 1/e - eps)-approximate.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

from .core import QueryVector
from .errors import InvalidQuery
from .ranked_lists import RankedIndex, TraversalCursor
from .scoring import CoverageState, Scorer
from .window import Snapshot


@dataclass(frozen=True)
class Query:
    k: int
    x: QueryVector
    epsilon: float = 0.1
    t: int | None = None

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 0:
            raise InvalidQuery(f"k must be a non-negative integer, got {self.k!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidQuery(f"epsilon must lie in (0, 1), got {self.epsilon}")


@dataclass
class QueryResult:
    members: tuple[int, ...]
    score: float
    evaluated: int
    elapsed: float
    engine: str
    trace: list[dict] = field(default_factory=list, repr=False)


def _check(q: Query, snapshot: Snapshot) -> None:
    snapshot.ensure_current()
    if q.t is not None and q.t != snapshot.now:
        raise InvalidQuery(f"query time {q.t} does not match snapshot time {snapshot.now}")


def _empty(engine: str, started: float) -> QueryResult:
    return QueryResult((), 0.0, 0, time.perf_counter() - started, engine)


def _exponent_range(delta_max: float, k: int, base: float) -> tuple[int, int]:
    """Integers j with delta_max <= base**j <= 2*k*delta_max."""
    lo = math.ceil(math.log(delta_max) / math.log(base))
    while base ** (lo - 1) >= delta_max:
        lo -= 1
    while base ** lo < delta_max:
        lo += 1
    hi = math.floor(math.log(2 * k * delta_max) / math.log(base))
    while base ** (hi + 1) <= 2 * k * delta_max:
        hi += 1
    while base ** hi > 2 * k * delta_max:
        hi -= 1
    return lo, hi


def query_mtts(q: Query, snapshot: Snapshot, index: RankedIndex, scorer: Scorer,
               trace: bool = False) -> QueryResult:
    started = time.perf_counter()
    _check(q, snapshot)
    k, x, base = q.k, q.x, 1.0 + q.epsilon
    cursor = TraversalCursor(index, x)
    if k == 0 or cursor.exhausted:
        return _empty("mtts", started)

    events: list[dict] = []
    candidates: dict[int, CoverageState] = {}
    children: dict = {}
    full: set[int] = set()
    lo = hi = None
    first_open = -math.inf  # smallest exponent whose candidate still has room
    delta_max = 0.0
    threshold = 0.0
    ub = cursor.upper_bound()
    evaluated = 0
    if trace:
        events.append({"event": "init", "ub": ub})

    def bar(j: int) -> float:
        return base ** j / (2 * k)

    while ub >= threshold:
        step = cursor.next()
        if step is None:
            break
        eid, _ = step
        e = snapshot.element(eid)
        d = index.delta(eid, x)
        evaluated += 1
        if d > delta_max:
            delta_max = d
            lo, hi = _exponent_range(delta_max, k, base)
            for j in [j for j in candidates if j < lo]:
                del candidates[j]
            first_open = max(first_open, lo)  # exponents below lo are gone for good
        if lo is not None:
            # bars grow with j, so only exponents with bar(j) <= d can take e
            for j in range(first_open, hi + 1):
                b = bar(j)
                if d < b:
                    break
                if j in full:
                    continue
                state = candidates.get(j)
                if state is None:
                    state = candidates[j] = CoverageState(x, scorer, snapshot, children)
                gain = state.marginal_gain(e)
                if gain >= b:
                    state.commit(e, gain)
                    if len(state) == k:
                        full.add(j)
            while first_open <= hi and first_open in full:
                first_open += 1
            threshold = bar(first_open) if first_open <= hi else math.inf
        ub = cursor.upper_bound()
        if trace:
            events.append({"event": "evaluate", "element": eid, "delta": d, "j_range": (lo, hi),
                           "members": {j: tuple(s.members) for j, s in candidates.items()},
                           "ub": ub, "threshold": threshold})

    best = None
    for j in sorted(candidates):
        state = candidates[j]
        if best is None or state.score > best.score:
            best = state
    members = tuple(best.members) if best else ()
    score = best.score if best else 0.0
    return QueryResult(members, score, evaluated, time.perf_counter() - started, "mtts", events)


def retrieve_above_threshold(tau: float, cursor: TraversalCursor, index: RankedIndex,
                             x: QueryVector) -> list[tuple[int, float]]:
    """Pull every element whose list-derived upper bound still reaches tau."""
    batch = []
    while cursor.upper_bound() >= tau:
        step = cursor.next()
        if step is None:
            break
        batch.append((step[0], index.delta(step[0], x)))
    return batch


def query_mttd(q: Query, snapshot: Snapshot, index: RankedIndex, scorer: Scorer,
               trace: bool = False) -> QueryResult:
    started = time.perf_counter()
    _check(q, snapshot)
    k, x, eps = q.k, q.x, q.epsilon
    cursor = TraversalCursor(index, x)
    if k == 0 or cursor.exhausted:
        return _empty("mttd", started)

    events: list[dict] = []
    state = CoverageState(x, scorer, snapshot)
    buffer: list[tuple[float, int]] = []
    evaluated = 0
    tau = cursor.upper_bound()
    tau_floor = 0.0

    while tau >= tau_floor and tau > 0.0:
        batch = retrieve_above_threshold(tau, cursor, index, x)
        evaluated += len(batch)
        for eid, d in batch:
            heapq.heappush(buffer, (-d, eid))
        if trace:
            events.append({"event": "round", "tau": tau,
                           "retrieved": [eid for eid, _ in batch],
                           "buffer": sorted(eid for _, eid in buffer)})
        while buffer and -buffer[0][0] >= tau:
            _, eid = heapq.heappop(buffer)
            e = snapshot.element(eid)
            gain = state.marginal_gain(e)
            if gain >= tau:
                state.commit(e, gain)
                if trace:
                    events.append({"event": "accept", "element": eid, "gain": gain, "tau": tau})
                if len(state) == k:
                    return QueryResult(tuple(state.members), state.score, evaluated,
                                       time.perf_counter() - started, "mttd", events)
            else:
                heapq.heappush(buffer, (-gain, eid))
        tau_floor = state.score * eps / k
        tau *= 1.0 - eps
        # nothing left that could ever clear a positive threshold
        if cursor.exhausted and (not buffer or -buffer[0][0] <= 0.0):
            break

    return QueryResult(tuple(state.members), state.score, evaluated,
                       time.perf_counter() - started, "mttd", events)
