"""Representativeness scores: entropy-weighted word coverage plus windowed influence.

The module-level functions compute everything from scratch and serve as the
reference path. ``CoverageState`` is the incremental path the query engines
use; the tests hold the two against each other.

A *window* argument for the from-scratch functions is a mapping of element id
to Element for exactly the elements of the sliding window. Influenced sets are
derived by scanning their references, independent of any maintained index.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

from .core import Element, QueryVector, ScoringConfig, TopicModel


def word_weight(w: int, e: Element, i: int, model: TopicModel) -> float:
    assert w in e.words, f"word {w} not in element {e.id}"
    p = model.prob(i, w) * e.topics.get(i, 0.0)
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -e.words[w] * p * math.log(p)


def semantic_score(S: Iterable[Element], i: int, model: TopicModel) -> float:
    best: dict[int, float] = {}
    for e in S:
        for w in e.words:
            s = word_weight(w, e, i, model)
            if s > best.get(w, 0.0):
                best[w] = s
    return math.fsum(best.values())


def influence_prob(S: Iterable[Element], e: Element, i: int) -> float:
    pe = e.topics.get(i, 0.0)
    refs = set(e.refs)
    survive = 1.0
    for src in S:
        if src.id in refs:
            survive *= 1.0 - src.topics.get(i, 0.0) * pe
    return 1.0 - survive


def influenced_set(S: Iterable[Element], window: Mapping[int, Element]) -> set[int]:
    ids = {e.id for e in S}
    return {c.id for c in window.values() if ids.intersection(c.refs)}


def influence_score(S: Iterable[Element], i: int, window: Mapping[int, Element]) -> float:
    S = list(S)
    return math.fsum(influence_prob(S, window[c], i) for c in influenced_set(S, window))


def topic_score(S: Iterable[Element], i: int, model: TopicModel, cfg: ScoringConfig,
                window: Mapping[int, Element]) -> float:
    S = list(S)
    return cfg.lam * semantic_score(S, i, model) + cfg.infl_weight * influence_score(S, i, window)


def total_score(S: Iterable[Element], x: QueryVector, model: TopicModel, cfg: ScoringConfig,
                window: Mapping[int, Element]) -> float:
    S = list(S)
    if not S:
        return 0.0
    return math.fsum(xi * topic_score(S, i, model, cfg, window) for i, xi in x.entries.items())


class Scorer:
    """Per-element score pieces with caching, bound to one model and config.

    ``view`` arguments are anything exposing ``element(id)`` and
    ``influenced(id)`` (the maintained reverse-reference index), normally a
    :class:`ksir.window.Snapshot`.
    """

    def __init__(self, model: TopicModel, cfg: ScoringConfig):
        self.model = model
        self.cfg = cfg
        self._sigma: dict[tuple[int, int], dict[int, float]] = {}
        self._semantic: dict[tuple[int, int], float] = {}

    def sigma(self, e: Element, i: int) -> dict[int, float]:
        key = (e.id, i)
        row = self._sigma.get(key)
        if row is None:
            row = {}
            for w in e.words:
                s = word_weight(w, e, i, self.model)
                if s > 0.0:
                    row[w] = s
            self._sigma[key] = row
        return row

    def semantic(self, e: Element, i: int) -> float:
        key = (e.id, i)
        r = self._semantic.get(key)
        if r is None:
            r = self._semantic[key] = math.fsum(self.sigma(e, i).values())
        return r

    def forget(self, eid: int) -> None:
        for i in range(self.model.z):
            self._sigma.pop((eid, i), None)
            self._semantic.pop((eid, i), None)

    def influence_mass(self, e: Element, i: int, view) -> float:
        return math.fsum(view.element(c).topics.get(i, 0.0) for c in view.influenced(e.id))

    def topic_delta(self, e: Element, i: int, view) -> float:
        """delta_i(e) = f_i({e}), read through the maintained index."""
        pe = e.topics.get(i, 0.0)
        if pe <= 0.0:
            return 0.0
        return (self.cfg.lam * self.semantic(e, i)
                + self.cfg.infl_weight * pe * self.influence_mass(e, i, view))

    def delta(self, e: Element, x: QueryVector, view) -> float:
        return math.fsum(xi * self.topic_delta(e, i, view)
                         for i, xi in x.entries.items() if i in e.topics)


class CoverageState:
    """Incremental f(S, x) for one candidate set S.

    ``word_max[i][w]`` holds the best sigma_i(w, .) over members and
    ``survival[i][c]`` the probability that no member influences c on topic i.
    Both only carry topics with x_i > 0.
    """

    def __init__(self, x: QueryVector, scorer: Scorer, view, children: dict | None = None):
        self.x = x
        self.scorer = scorer
        self.view = view
        # (eid, topic) -> [(child, p_topic(child))]; states of one query may share it
        self.children = {} if children is None else children
        self.members: list[int] = []
        self._chosen: set[int] = set()
        self.word_max: dict[int, dict[int, float]] = {i: {} for i in x.entries}
        self.survival: dict[int, dict[int, float]] = {i: {} for i in x.entries}
        self.score = 0.0

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, eid: int) -> bool:
        return eid in self._chosen

    def _topic_gain(self, e: Element, i: int, pe: float) -> float:
        cfg = self.scorer.cfg
        wmax = self.word_max[i]
        sem = 0.0
        for w, s in self.scorer.sigma(e, i).items():
            cur = wmax.get(w, 0.0)
            if s > cur:
                sem += s - cur
        infl = 0.0
        if cfg.infl_weight:
            infl = pe * self._open_mass(e.id, i)
        return cfg.lam * sem + cfg.infl_weight * infl

    def _open_mass(self, eid: int, i: int) -> float:
        """Sum of survival * p_i(c) over the elements eid influences."""
        surv = self.survival[i]
        kids = self.view.influenced(eid)
        mass_of = getattr(self.view, "influence_mass", None)
        if mass_of is not None and len(surv) < len(kids):
            # walk the few already-touched children instead of all of them
            lost = 0.0
            for c, sc in surv.items():
                if c in kids:
                    lost += (1.0 - sc) * self.view.element(c).topics.get(i, 0.0)
            return mass_of(eid, i) - lost
        if not surv and mass_of is not None:
            return mass_of(eid, i)
        total = 0.0
        for c, pc in self._children(eid, i):
            total += surv.get(c, 1.0) * pc
        return total

    def _children(self, eid: int, i: int) -> list[tuple[int, float]]:
        key = (eid, i)
        pairs = self.children.get(key)
        if pairs is None:
            element = self.view.element
            pairs = []
            for c in self.view.influenced(eid):
                pc = element(c).topics.get(i, 0.0)
                if pc:
                    pairs.append((c, pc))
            self.children[key] = pairs
        return pairs

    def marginal_gain(self, e: Element) -> float:
        """Delta(e | S) without mutating the state."""
        if e.id in self._chosen:
            return 0.0
        gain = 0.0
        for i, xi in self.x.entries.items():
            pe = e.topics.get(i, 0.0)
            if pe > 0.0:
                gain += xi * self._topic_gain(e, i, pe)
        return gain

    def commit(self, e: Element, gain: float | None = None) -> float:
        """Add e to S; returns the realized gain (pass it in if already known)."""
        assert e.id not in self._chosen, f"element {e.id} already selected"
        if gain is None:
            gain = self.marginal_gain(e)
        for i in self.x.entries:
            pe = e.topics.get(i, 0.0)
            if pe <= 0.0:
                continue
            wmax = self.word_max[i]
            for w, s in self.scorer.sigma(e, i).items():
                if s > wmax.get(w, 0.0):
                    wmax[w] = s
            surv = self.survival[i]
            if surv:
                for c, pc in self._children(e.id, i):
                    surv[c] = surv.get(c, 1.0) * (1.0 - pe * pc)
            else:
                surv.update({c: 1.0 - pe * pc for c, pc in self._children(e.id, i)})
        self.members.append(e.id)
        self._chosen.add(e.id)
        self.score += gain
        return gain
