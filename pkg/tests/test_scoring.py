import itertools
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from ksir import scoring
from ksir.core import Element, QueryVector
from ksir.scoring import CoverageState, Scorer

from oracles import TOY_CFG, random_instance, random_vector, toy, toy_engine

W = {j: j - 1 for j in range(1, 17)}


@pytest.fixture(scope="module")
def toy_state():
    model, elements = toy()
    eng = toy_engine(8)
    snap = eng.snapshot()
    return model, {e.id: e for e in elements}, snap.window_elements(), eng


def _sigma(p):
    return -p * math.log(p)


def test_word_weights_match_worked_example(toy_state):
    model, E, _, _ = toy_state
    assert scoring.word_weight(W[4], E[2], 1, model) == pytest.approx(0.18, abs=5e-3)
    assert scoring.word_weight(W[11], E[7], 1, model) == pytest.approx(0.19, abs=5e-3)
    # w7 carries no mass on the second topic
    assert scoring.word_weight(W[7], E[4], 1, model) == 0.0


def test_word_weight_counts_frequency(toy_state):
    model, _, _, _ = toy_state
    e = Element(99, 99, {W[4]: 3}, (), {1: 1.0})
    assert scoring.word_weight(W[4], e, 1, model) == pytest.approx(3 * _sigma(model.prob(1, W[4])))


def test_semantic_score_of_pair(toy_state):
    model, E, _, _ = toy_state
    # direct evaluation: w4 and w11 are shared, w9 only in e2; e2 has the larger p_2(e)
    expected = sum(_sigma(model.prob(1, W[w]) * 0.74) for w in (4, 9, 11))
    assert scoring.semantic_score([E[2], E[7]], 1, model) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.5379, abs=1e-4)


def test_semantic_score_edge_cases(toy_state):
    model, E, _, _ = toy_state
    assert scoring.semantic_score([], 0, model) == 0.0
    assert scoring.semantic_score([E[4]], 0, model) == pytest.approx(_sigma(0.12) + _sigma(0.11))
    assert scoring.semantic_score([E[4]], 0, model) == pytest.approx(0.497, abs=1e-3)


def test_influence_probabilities(toy_state):
    _, E, _, _ = toy_state
    assert scoring.influence_prob([E[2], E[3]], E[8], 1) == pytest.approx(0.40, abs=5e-3)
    assert scoring.influence_prob([E[2], E[3]], E[7], 1) == pytest.approx(0.50, abs=5e-3)
    assert scoring.influence_prob([E[5]], E[8], 1) == 0.0


def test_influence_scores(toy_state):
    _, E, window, _ = toy_state
    assert scoring.influenced_set([E[2], E[3]], window) == {6, 7, 8}
    assert scoring.influence_score([E[2], E[3]], 1, window) == pytest.approx(0.93, abs=5e-3)
    assert scoring.influence_score([E[5]], 0, window) == 0.0
    assert scoring.influence_score([E[3]], 0, window) == pytest.approx(0.89 * 0.70 + 0.89 * 0.51)


def test_total_scores(toy_state):
    model, E, window, _ = toy_state
    x = QueryVector({0: 0.5, 1: 0.5})
    assert scoring.total_score([E[1], E[3]], x, model, TOY_CFG, window) == pytest.approx(0.65, abs=0.01)
    assert scoring.total_score([], x, model, TOY_CFG, window) == 0.0
    y = QueryVector({0: 0.1, 1: 0.9})
    assert scoring.total_score([E[1], E[2]], y, model, TOY_CFG, window) == pytest.approx(0.95486, abs=1e-5)


def test_marginal_gains_on_toy(toy_state):
    model, E, window, eng = toy_state
    snap = eng.snapshot()
    x = QueryVector({0: 0.5, 1: 0.5})
    state = CoverageState(x, eng.scorer, snap)
    for eid in snap.active_ids():
        assert state.marginal_gain(E[eid]) == pytest.approx(
            scoring.total_score([E[eid]], x, model, TOY_CFG, window), abs=1e-12)
    state.commit(E[3])
    assert state.marginal_gain(E[1]) == pytest.approx(0.31, abs=0.01)
    state.commit(E[1])
    assert state.score == pytest.approx(0.65, abs=0.01)
    assert state.marginal_gain(E[1]) == pytest.approx(0.0, abs=1e-12)


def test_marginal_gain_does_not_mutate(toy_state):
    _, E, _, eng = toy_state
    state = CoverageState(QueryVector({0: 0.5, 1: 0.5}), eng.scorer, eng.snapshot())
    state.commit(E[3])
    before = (list(state.members), {i: dict(v) for i, v in state.word_max.items()},
              {i: dict(v) for i, v in state.survival.items()}, state.score)
    state.marginal_gain(E[6])
    after = (list(state.members), {i: dict(v) for i, v in state.word_max.items()},
             {i: dict(v) for i, v in state.survival.items()}, state.score)
    assert before == after


def _random_setup(seed):
    rng = random.Random(seed)
    model, elements, cfg, eng = random_instance(rng, n=rng.randint(3, 15))
    snap = eng.snapshot()
    return rng, model, cfg, eng, snap, snap.window_elements()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_commit_sequence_matches_scratch(seed):
    rng, model, cfg, eng, snap, window = _random_setup(seed)
    ids = snap.active_ids()
    x = random_vector(rng, model.z)
    state = CoverageState(x, eng.scorer, snap)
    order = rng.sample(ids, rng.randint(1, len(ids)))
    chosen = []
    for eid in order:
        e = snap.element(eid)
        before = scoring.total_score(chosen, x, model, cfg, window)
        gain = state.marginal_gain(e)
        after = scoring.total_score(chosen + [e], x, model, cfg, window)
        assert gain == pytest.approx(after - before, abs=1e-9)
        state.commit(e)
        chosen.append(e)
        assert state.score == pytest.approx(after, abs=1e-9)
        assert all(0.0 <= v <= 1.0 for s in state.survival.values() for v in s.values())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_diminishing_returns(seed):
    rng, model, cfg, eng, snap, window = _random_setup(seed)
    ids = snap.active_ids()
    if len(ids) < 2:
        return
    e_id = rng.choice(ids)
    rest = [i for i in ids if i != e_id]
    big = rng.sample(rest, rng.randint(0, len(rest)))
    small = [i for i in big if rng.random() < 0.5]
    el = snap.element
    e = el(e_id)
    S, T = [el(i) for i in small], [el(i) for i in big]
    x = random_vector(rng, model.z)
    fns = [lambda A, i=i: scoring.semantic_score(A, i, model) for i in range(model.z)]
    fns += [lambda A, i=i: scoring.influence_score(A, i, window) for i in range(model.z)]
    fns.append(lambda A: scoring.total_score(A, x, model, cfg, window))
    for f in fns:
        d_small = f(S + [e]) - f(S)
        d_big = f(T + [e]) - f(T)
        assert d_small >= d_big - 1e-9
        assert d_big >= -1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.0, 1.0))
def test_total_score_is_linear_in_x(seed, alpha):
    rng, model, cfg, eng, snap, window = _random_setup(seed)
    ids = snap.active_ids()
    S = [snap.element(i) for i in rng.sample(ids, rng.randint(0, len(ids)))]
    x1, x2 = random_vector(rng, model.z), random_vector(rng, model.z)
    mix = {i: alpha * x1.entries.get(i, 0.0) + (1 - alpha) * x2.entries.get(i, 0.0)
           for i in set(x1.entries) | set(x2.entries)}
    mix = {i: v for i, v in mix.items() if v > 0}
    x = QueryVector.from_weights(mix)
    lhs = scoring.total_score(S, x, model, cfg, window)
    rhs = alpha * scoring.total_score(S, x1, model, cfg, window) + \
        (1 - alpha) * scoring.total_score(S, x2, model, cfg, window)
    assert lhs == pytest.approx(rhs, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_semantic_subadditive_and_probabilities_bounded(seed):
    rng, model, cfg, eng, snap, window = _random_setup(seed)
    els = [snap.element(i) for i in snap.active_ids()]
    for i in range(model.z):
        for size in (1, 2, 3):
            for S in itertools.islice(itertools.combinations(els, min(size, len(els))), 10):
                assert scoring.semantic_score(S, i, model) <= \
                    sum(scoring.semantic_score([e], i, model) for e in S) + 1e-12
                for c in window.values():
                    assert 0.0 <= scoring.influence_prob(S, c, i) <= 1.0


def test_scorer_delta_matches_scratch(toy_state):
    model, E, window, eng = toy_state
    scorer = Scorer(model, TOY_CFG)
    snap = eng.snapshot()
    x = QueryVector({0: 0.3, 1: 0.7})
    for eid in snap.active_ids():
        assert scorer.delta(E[eid], x, snap) == pytest.approx(
            scoring.total_score([E[eid]], x, model, TOY_CFG, window), abs=1e-12)
