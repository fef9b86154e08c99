import math
import random

import pytest

from ksir import scoring
from ksir.baselines import query_bruteforce, query_celf, query_sieve, query_topk_rep
from ksir.core import Element, QueryVector, ScoringConfig, TopicModel
from ksir.engines import Query, query_mttd
from ksir.errors import TooLarge

from oracles import build_engine, plain_greedy, random_instance, random_vector, toy_engine

X = QueryVector({0: 0.5, 1: 0.5})


def _run(fn, eng, q):
    return fn(q, eng.snapshot(), eng.index, eng.scorer)


def test_celf_on_toy():
    res = _run(query_celf, toy_engine(8), Query(2, X, 0.1, 8))
    assert set(res.members) == {1, 3}
    assert res.score == pytest.approx(0.65, abs=0.01)
    assert res.evaluated == 7


def test_bruteforce_on_toy():
    eng = toy_engine(8)
    a = _run(query_bruteforce, eng, Query(2, X, 0.1, 8))
    assert set(a.members) == {1, 3} and a.score == pytest.approx(0.65, abs=0.01)
    b = _run(query_bruteforce, eng, Query(2, QueryVector({0: 0.1, 1: 0.9}), 0.1, 8))
    assert set(b.members) == {1, 2}
    assert b.score == pytest.approx(0.95486, abs=1e-5)
    empty = _run(query_bruteforce, eng, Query(0, X, 0.1, 8))
    assert empty.members == () and empty.score == 0.0


def test_bruteforce_guard():
    model = TopicModel(1, 1, [{0: 1.0}])
    elements = [Element(i, i, {0: 1}, (), {0: 1.0}) for i in range(1, 23)]
    eng = build_engine(model, elements, ScoringConfig(0.5, 1.0, 30, 1))
    with pytest.raises(TooLarge):
        _run(query_bruteforce, eng, Query(2, QueryVector({0: 1.0}), 0.1))


def test_topk_on_toy():
    eng = toy_engine(8)
    res = _run(query_topk_rep, eng, Query(2, X, 0.1, 8))
    assert res.members == (3, 1)
    one = _run(query_topk_rep, eng, Query(1, X, 0.1, 8))
    assert one.members == _run(query_celf, eng, Query(1, X, 0.1, 8)).members


def test_sieve_touches_every_active_element():
    eng = toy_engine(8)
    res = _run(query_sieve, eng, Query(2, X, 0.1, 8))
    assert res.evaluated == eng.snapshot().n_t
    assert res.score >= (0.5 - 0.1) * 0.6487


def _cases(count, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        model, elements, cfg, eng = random_instance(rng, n=rng.randint(3, 14))
        n_t = eng.snapshot().n_t
        k = rng.randint(1, 4)
        if n_t and math.comb(n_t, min(k, n_t)) <= 5000:
            out.append((eng, random_vector(rng, model.z), k))
    return out


def test_celf_equals_plain_greedy_and_bounds():
    for eng, x, k in _cases(120, seed=17):
        snap = eng.snapshot()
        window = snap.window_elements()
        q = Query(k, x, 0.1, eng.now)
        celf = _run(query_celf, eng, q)
        f = lambda S: scoring.total_score(S, x, eng.model, eng.cfg, window)
        members, score = plain_greedy([snap.element(i) for i in snap.active_ids()], k, f)
        assert list(celf.members) == members
        assert celf.score == pytest.approx(score, abs=1e-9)
        opt = _run(query_bruteforce, eng, q).score
        assert celf.score >= (1 - 1 / math.e) * opt - 1e-12
        assert celf.evaluated == snap.n_t


@pytest.mark.parametrize("eps", [0.1, 0.3, 0.5])
def test_sieve_half_approximation(eps):
    for eng, x, k in _cases(60, seed=int(eps * 1000)):
        q = Query(k, x, eps, eng.now)
        res = _run(query_sieve, eng, q)
        assert res.score >= (0.5 - eps) * _run(query_bruteforce, eng, q).score - 1e-12
        assert res.evaluated == eng.snapshot().n_t
        assert len(res.members) <= k


def test_sieve_k1_bound_and_late_maximum():
    for eng, x, _ in _cases(40, seed=5):
        q = Query(1, x, 0.2, eng.now)
        best = max(eng.index.delta(e, x) for e in eng.snapshot().active_ids())
        assert _run(query_sieve, eng, q).score >= (0.5 - 0.2) * best - 1e-12
    # a maximum arriving less than a factor (1+eps) above the running max can find
    # every live threshold already filled, so a single pass need not keep it
    model = TopicModel(1, 2, [{0: 0.5, 1: 0.5}])
    elements = [Element(1, 1, {0: 5}, (), {0: 1.0}), Element(2, 2, {0: 6}, (), {0: 1.0})]
    eng = build_engine(model, elements, ScoringConfig(1.0, 1.0, 10, 1))
    x = QueryVector({0: 1.0})
    res = _run(query_sieve, eng, Query(1, x, 0.5, eng.now))
    assert eng.index.delta(2, x) > eng.index.delta(1, x)
    assert res.members == (1,)
    assert res.score >= (0.5 - 0.5) * eng.index.delta(2, x)


def test_topk_returns_highest_deltas():
    for eng, x, k in _cases(40, seed=8):
        res = _run(query_topk_rep, eng, Query(k, x, 0.1, eng.now))
        scored = [e for e in eng.snapshot().active_ids() if eng.index.delta(e, x) > 0]
        ranked = sorted(scored, key=lambda e: (-eng.index.delta(e, x), e))
        assert list(res.members) == ranked[:k]


def test_topk_loses_to_mttd_on_near_duplicates():
    # two copies of the strongest post crowd out a weaker but complementary one
    model = TopicModel(1, 4, [{0: 0.25, 1: 0.25, 2: 0.25, 3: 0.25}])
    elements = [
        Element(1, 1, {0: 1, 1: 1}, (), {0: 1.0}),
        Element(2, 2, {0: 1, 1: 1}, (), {0: 1.0}),
        Element(3, 3, {2: 1}, (), {0: 1.0}),
    ]
    eng = build_engine(model, elements, ScoringConfig(1.0, 1.0, 10, 1))
    q = Query(2, QueryVector({0: 1.0}), 0.1, eng.now)
    topk = _run(query_topk_rep, eng, q)
    mttd = _run(query_mttd, eng, q)
    assert topk.members == (1, 2)
    assert topk.score < mttd.score
