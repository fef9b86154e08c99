import random

import pytest

from ksir.core import Element, QueryVector, ScoringConfig, TopicModel
from ksir.ranked_lists import TraversalCursor, integrity_check
from ksir.service import StreamEngine

from oracles import TOY_CFG, expected_lists, random_elements, random_model, toy, toy_engine


def _assert_lists_match(eng, expected, tol=1e-9):
    got = {i: dict((eid, d) for eid, d in rl) for i, rl in eng.index.lists.items() if len(rl)}
    assert set(got) == set(expected)
    for i, scores in expected.items():
        assert set(got[i]) == set(scores)
        for eid, d in scores.items():
            assert got[i][eid] == pytest.approx(d, abs=tol)


def test_toy_lists_after_full_replay():
    model, elements = toy()
    eng = toy_engine(8)
    assert integrity_check(eng.index, eng.snapshot()).ok
    _assert_lists_match(eng, expected_lists(elements, 8, model, TOY_CFG))
    assert all(4 not in {eid for eid, _ in rl} for rl in eng.index.lists.values())


def test_zero_probability_topic_has_no_tuple():
    eng = toy_engine(7)
    assert 4 in {eid for eid, _ in eng.index.lists[0]}
    assert 4 not in {eid for eid, _ in eng.index.lists[1]}


def test_head_of_first_topic_is_e3():
    eng = toy_engine(8)
    assert eng.index.lists[0].head()[0] == 3


def test_first_yield_and_initial_upper_bound():
    model, elements = toy()
    eng = toy_engine(8)
    x = QueryVector({0: 0.5, 1: 0.5})
    expected = expected_lists(elements, 8, model, TOY_CFG)
    ub = sum(0.5 * max(scores.values()) for scores in expected.values())
    cursor = TraversalCursor(eng.index, x)
    assert cursor.upper_bound() == pytest.approx(ub, abs=1e-12)
    assert cursor.upper_bound() == pytest.approx(0.6036, abs=1e-4)
    assert cursor.next() == (3, 0)


def test_single_topic_traversal_follows_list_order():
    eng = toy_engine(8)
    cursor = TraversalCursor(eng.index, QueryVector({1: 1.0}))
    order = []
    while (step := cursor.next()) is not None:
        order.append(step[0])
    assert order == [eid for eid, _ in eng.index.lists[1]]


def test_traversal_visits_each_element_once_in_bound_order():
    rng = random.Random(5)
    model = random_model(rng, 4, 10)
    elements = random_elements(rng, 80, 4, 10)
    cfg = ScoringConfig(0.5, 1.0, 40, 1)
    eng = StreamEngine(model, cfg)
    eng.ingest(elements, until=elements[-1].ts)
    for _ in range(20):
        x = QueryVector.from_weights({i: rng.random() + 0.1 for i in rng.sample(range(4), 2)})
        cursor = TraversalCursor(eng.index, x)
        seen, bounds = [], [cursor.upper_bound()]
        while (step := cursor.next()) is not None:
            eid, _ = step
            # the yielded element can never beat the bound it was drawn under
            assert eng.index.delta(eid, x) <= bounds[-1] + 1e-12
            seen.append(eid)
            bounds.append(cursor.upper_bound())
        assert len(seen) == len(set(seen))
        reachable = {eid for i in x.entries for eid, _ in eng.index.lists.get(i, [])}
        assert set(seen) == reachable
        assert all(a >= b - 1e-12 for a, b in zip(bounds, bounds[1:]))
        assert cursor.exhausted and cursor.upper_bound() == 0.0


def test_randomized_replay_stays_exact():
    rng = random.Random(2024)
    z, m = 4, 12
    model = random_model(rng, z, m)
    elements = random_elements(rng, 1000, z, m, ts_step=2, ref_prob=0.7)
    cfg = ScoringConfig(0.5, 1.5, 30, 3)
    eng = StreamEngine(model, cfg)
    seen: list[Element] = []
    pos = 0
    end = elements[-1].ts + 2 * cfg.window_len
    step = 0
    while eng.now < end:
        hi = eng.now + cfg.bucket_len
        bucket = []
        while pos < len(elements) and elements[pos].ts <= hi:
            bucket.append(elements[pos])
            pos += 1
        eng.ingest_bucket(bucket)
        seen.extend(bucket)
        report = integrity_check(eng.index, eng.snapshot())
        assert report.ok, report
        if step % 25 == 0 or eng.now >= end:
            _assert_lists_match(eng, expected_lists(seen, eng.now, model, cfg))
        step += 1
    assert pos == len(elements)
    assert not any(len(rl) for rl in eng.index.lists.values())


def test_parent_score_decays_when_referrer_expires():
    model = TopicModel(1, 2, [{0: 0.5, 1: 0.5}])
    cfg = ScoringConfig(0.5, 1.0, 3, 1)
    eng = StreamEngine(model, cfg)
    e1 = Element(1, 1, {0: 1}, (), {0: 1.0})
    e2 = Element(2, 2, {1: 1}, (1,), {0: 1.0})
    e3 = Element(3, 3, {1: 1}, (1,), {0: 1.0})
    eng.ingest([e1, e2, e3], until=3)
    semantic = 0.5 * 0.5 * 0.6931471805599453
    assert eng.index.lists[0].lookup[1] == pytest.approx(semantic + 0.5 * 2.0)
    eng.advance_to(4)  # e1 leaves the window; e2 and e3 still refer to it
    assert eng.index.lists[0].lookup[1] == pytest.approx(semantic + 0.5 * 2.0)
    eng.advance_to(5)  # e2 expires
    assert eng.index.lists[0].lookup[1] == pytest.approx(semantic + 0.5 * 1.0)
    assert integrity_check(eng.index, eng.snapshot()).ok
    eng.advance_to(6)  # e3 expires; e1 has no referrer left
    assert 1 not in eng.index.lists[0].lookup
