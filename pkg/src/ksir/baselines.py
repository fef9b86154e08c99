"""Reference algorithms the engines are measured against."""

from __future__ import annotations

import heapq
import itertools
import math
import time

from . import scoring
from .core import Element
from .engines import Query, QueryResult, _check, _empty, _exponent_range, query_mtts, query_mttd
from .errors import TooLarge
from .ranked_lists import RankedIndex, TraversalCursor
from .scoring import CoverageState, Scorer
from .window import Snapshot

MAX_BRUTE_N = 20
MAX_BRUTE_SUBSETS = 200_000


def query_celf(q: Query, snapshot: Snapshot, index: RankedIndex | None, scorer: Scorer,
               trace: bool = False) -> QueryResult:
    """Lazy greedy over every active element; ties go to the lowest id."""
    started = time.perf_counter()
    _check(q, snapshot)
    if q.k == 0:
        return _empty("celf", started)
    state = CoverageState(q.x, scorer, snapshot)
    heap = []
    for eid in snapshot.active_ids():
        heap.append((-state.marginal_gain(snapshot.element(eid)), eid, 0))
    evaluated = len(heap)
    heapq.heapify(heap)
    while heap and len(state) < q.k:
        neg, eid, stamp = heapq.heappop(heap)
        if stamp == len(state):
            state.commit(snapshot.element(eid), -neg)
        else:
            gain = state.marginal_gain(snapshot.element(eid))
            heapq.heappush(heap, (-gain, eid, len(state)))
    return QueryResult(tuple(state.members), state.score, evaluated,
                       time.perf_counter() - started, "celf")


def query_sieve(q: Query, snapshot: Snapshot, index: RankedIndex | None, scorer: Scorer,
                trace: bool = False) -> QueryResult:
    """SieveStreaming: one pass in id order over a lazily grown threshold family."""
    started = time.perf_counter()
    _check(q, snapshot)
    k, base = q.k, 1.0 + q.epsilon
    if k == 0:
        return _empty("sieve", started)
    sieves: dict[int, CoverageState] = {}
    children: dict = {}
    delta_max = 0.0
    lo = hi = None
    evaluated = 0
    for eid in snapshot.active_ids():
        e = snapshot.element(eid)
        d = scorer.delta(e, q.x, snapshot)
        evaluated += 1
        if d > delta_max:
            delta_max = d
            lo, hi = _exponent_range(delta_max, k, base)
            for j in [j for j in sieves if j < lo]:
                del sieves[j]
        if lo is None:
            continue
        for j in range(lo, hi + 1):
            state = sieves.get(j)
            if state is None:
                state = sieves[j] = CoverageState(q.x, scorer, snapshot, children)
            if len(state) >= k:
                continue
            bar = (base ** j / 2 - state.score) / (k - len(state))
            gain = state.marginal_gain(e)
            if gain >= bar:
                state.commit(e, gain)
    best = None
    for j in sorted(sieves):
        if best is None or sieves[j].score > best.score:
            best = sieves[j]
    members = tuple(best.members) if best else ()
    return QueryResult(members, best.score if best else 0.0, evaluated,
                       time.perf_counter() - started, "sieve")


def query_topk_rep(q: Query, snapshot: Snapshot, index: RankedIndex, scorer: Scorer,
                   trace: bool = False) -> QueryResult:
    """The k elements with the highest delta(e, x), found with threshold-style list traversal."""
    started = time.perf_counter()
    _check(q, snapshot)
    if q.k == 0:
        return _empty("topk", started)
    cursor = TraversalCursor(index, q.x)
    best: list[tuple[float, int]] = []  # min-heap of (delta, -id)
    evaluated = 0
    while True:
        if len(best) == q.k and best[0][0] >= cursor.upper_bound():
            break
        step = cursor.next()
        if step is None:
            break
        eid = step[0]
        item = (index.delta(eid, q.x), -eid)
        evaluated += 1
        if len(best) < q.k:
            heapq.heappush(best, item)
        elif item > best[0]:
            heapq.heapreplace(best, item)
    ranked = sorted(best, reverse=True)
    state = CoverageState(q.x, scorer, snapshot)
    for _, neg_id in ranked:
        state.commit(snapshot.element(-neg_id))
    return QueryResult(tuple(state.members), state.score, evaluated,
                       time.perf_counter() - started, "topk")


def query_bruteforce(q: Query, snapshot: Snapshot, index: RankedIndex | None,
                     scorer: Scorer, trace: bool = False) -> QueryResult:
    """Exact optimum by enumerating every subset of size min(k, n_t)."""
    started = time.perf_counter()
    _check(q, snapshot)
    ids = snapshot.active_ids()
    size = min(q.k, len(ids))
    if size == 0:
        return _empty("brute", started)
    if len(ids) > MAX_BRUTE_N or math.comb(len(ids), size) > MAX_BRUTE_SUBSETS:
        raise TooLarge(f"C({len(ids)}, {size}) subsets exceed the brute-force guard")
    window = snapshot.window_elements()
    elements: list[Element] = [snapshot.element(i) for i in ids]
    model, cfg = scorer.model, scorer.cfg
    best_score, best_set = -1.0, ()
    for combo in itertools.combinations(elements, size):
        s = scoring.total_score(combo, q.x, model, cfg, window)
        if s > best_score:
            best_score, best_set = s, tuple(e.id for e in combo)
    return QueryResult(best_set, best_score, math.comb(len(ids), size),
                       time.perf_counter() - started, "brute")


ENGINES = {
    "mtts": query_mtts,
    "mttd": query_mttd,
    "celf": query_celf,
    "sieve": query_sieve,
    "topk": query_topk_rep,
    "brute": query_bruteforce,
}
