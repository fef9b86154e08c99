"""Invariant suite run by ``ksir check`` against a replayed stream."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .. import scoring
from ..core import QueryVector
from ..scoring import CoverageState
from ..service import StreamEngine

TOL = 1e-9


@dataclass
class CheckOutcome:
    name: str
    ok: bool
    detail: str


def _random_vector(rng: random.Random, z: int) -> QueryVector:
    topics = rng.sample(range(z), min(z, rng.randint(1, 3)))
    return QueryVector.from_weights({i: rng.random() + 0.05 for i in topics})


def check_window(engine: StreamEngine) -> CheckOutcome:
    snap = engine.snapshot()
    lo, hi = engine.now - engine.cfg.window_len + 1, engine.now
    window = snap.window_elements()
    stray = [e.id for e in window.values() if not lo <= e.ts <= hi]
    referenced = {r for e in window.values() for r in e.refs}
    orphans = [eid for eid in snap.active_ids() if eid not in window and eid not in referenced]
    lost = [r for r in referenced if r in engine.store.elements and r not in snap]
    ok = not (stray or orphans or lost)
    return CheckOutcome("window", ok, f"window={len(window)} active={snap.n_t} "
                        f"out_of_range={stray[:5]} unreferenced={orphans[:5]} missing_parents={lost[:5]}")


def check_singletons(engine: StreamEngine, samples: int, rng: random.Random) -> CheckOutcome:
    """Ranked-list delta(e, x) against a from-scratch f({e}, x)."""
    snap = engine.snapshot()
    ids = snap.active_ids()
    window = snap.window_elements()
    worst = 0.0
    for eid in rng.sample(ids, min(samples, len(ids))):
        x = _random_vector(rng, engine.model.z)
        fast = engine.index.delta(eid, x)
        slow = scoring.total_score([snap.element(eid)], x, engine.model, engine.cfg, window)
        worst = max(worst, abs(fast - slow))
    return CheckOutcome("singletons", worst <= TOL, f"max |delta - f({{e}})| = {worst:.3g}")


def check_sets(engine: StreamEngine, samples: int, rng: random.Random) -> CheckOutcome:
    """Incremental coverage state against from-scratch f(S, x), plus diminishing returns."""
    snap = engine.snapshot()
    ids = snap.active_ids()
    window = snap.window_elements()
    model, cfg = engine.model, engine.cfg
    drift, violations = 0.0, 0
    for _ in range(samples if len(ids) >= 3 else 0):
        x = _random_vector(rng, model.z)
        big = rng.sample(ids, min(len(ids) - 1, rng.randint(2, 5)))
        small = big[:rng.randint(0, len(big) - 1)]
        e = snap.element(rng.choice([i for i in ids if i not in big]))
        state = CoverageState(x, engine.scorer, snap)
        for eid in big:
            state.commit(snap.element(eid))
        members = [snap.element(i) for i in big]
        drift = max(drift, abs(state.score - scoring.total_score(members, x, model, cfg, window)))

        def gain(base):
            els = [snap.element(i) for i in base]
            return (scoring.total_score(els + [e], x, model, cfg, window)
                    - scoring.total_score(els, x, model, cfg, window))

        g_small, g_big = gain(small), gain(big)
        if g_small < g_big - TOL or g_big < -TOL:
            violations += 1
    return CheckOutcome("sets", drift <= TOL and not violations,
                        f"max coverage drift {drift:.3g}, submodularity violations {violations}")


def run_checks(engine: StreamEngine, samples: int = 20, seed: int = 0) -> list[CheckOutcome]:
    rng = random.Random(seed)
    report = engine.check()
    out = [CheckOutcome("ranked_lists", report.ok,
                        f"checked {report.checked}, max drift {report.max_drift:.3g}, "
                        f"missing {len(report.missing)}, extra {len(report.extra)}, "
                        f"misordered {len(report.order_violations)}")]
    out.append(check_window(engine))
    out.append(check_singletons(engine, samples, rng))
    out.append(check_sets(engine, samples, rng))
    return out
