"""Sliding window W_t, active set A_t and the reverse-reference index I_t(e)."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .core import Element, ScoringConfig
from .errors import BadReference, DuplicateId, OutOfOrderBucket, StaleSnapshot

log = logging.getLogger(__name__)


@dataclass
class UpdateReport:
    now: int
    inserted: list[int] = field(default_factory=list)
    revived: list[int] = field(default_factory=list)
    expired: list[int] = field(default_factory=list)
    evicted: list[int] = field(default_factory=list)
    changed: set[int] = field(default_factory=set)
    dangling: int = 0


class ActiveStore:
    """Single-writer store of the active elements.

    ``influenced_by[e]`` maps each window element referring to e onto its
    timestamp. ``infl_mass[e][i]`` is the running sum of p_i(c) over those
    referrers, which keeps single-element influence scores O(1) to refresh.
    Elements leaving A_t move to ``archive`` so a late reference can bring
    them back.
    """

    def __init__(self, cfg: ScoringConfig, start: int = 0):
        self.cfg = cfg
        self.now = start
        self.version = 0
        self.elements: dict[int, Element] = {}
        self.in_window: deque[int] = deque()
        self.window_ids: set[int] = set()
        self.influenced_by: dict[int, dict[int, int]] = {}
        self.infl_mass: dict[int, dict[int, float]] = {}
        self.archive: dict[int, Element] = {}
        self.dangling = 0

    @property
    def window_start(self) -> int:
        return self.now - self.cfg.window_len + 1

    def _lookup(self, eid: int) -> Element | None:
        e = self.elements.get(eid)
        return e if e is not None else self.archive.get(eid)

    def _check_bucket(self, bucket: list[Element]) -> None:
        hi = self.now + self.cfg.bucket_len
        seen: dict[int, Element] = {}
        for e in bucket:
            if not self.now < e.ts <= hi:
                raise OutOfOrderBucket(
                    f"element {e.id} at ts={e.ts} outside bucket ({self.now}, {hi}]")
            if e.id in seen or self._lookup(e.id) is not None:
                raise DuplicateId(f"element id {e.id} already seen")
            seen[e.id] = e
        for e in bucket:
            for r in e.refs:
                parent = seen.get(r) or self._lookup(r)
                if parent is not None and parent.ts >= e.ts:
                    raise BadReference(
                        f"element {e.id} (ts={e.ts}) refers to {r} (ts={parent.ts})")

    def _add_referrer(self, parent: int, child: Element) -> None:
        self.influenced_by.setdefault(parent, {})[child.id] = child.ts
        mass = self.infl_mass.setdefault(parent, {})
        for i, p in child.topics.items():
            mass[i] = mass.get(i, 0.0) + p

    def _drop_referrer(self, parent: int, child: Element) -> None:
        refs = self.influenced_by[parent]
        del refs[child.id]
        if not refs:
            del self.influenced_by[parent]
            del self.infl_mass[parent]
            return
        mass = self.infl_mass[parent]
        for i, p in child.topics.items():
            mass[i] -= p

    def ingest_bucket(self, bucket: Iterable[Element]) -> UpdateReport:
        bucket = sorted(bucket, key=lambda e: (e.ts, e.id))
        self._check_bucket(bucket)
        report = UpdateReport(now=self.now + self.cfg.bucket_len)

        for e in bucket:
            self.elements[e.id] = e
            self.in_window.append(e.id)
            self.window_ids.add(e.id)
            report.inserted.append(e.id)
            for r in e.refs:
                if r not in self.elements:
                    old = self.archive.pop(r, None)
                    if old is None:
                        report.dangling += 1
                        continue
                    self.elements[r] = old
                    report.revived.append(r)
                self._add_referrer(r, e)
                report.changed.add(r)

        self.now = report.now
        self.version += 1
        start = self.window_start
        candidates: list[int] = []
        while self.in_window and self.elements[self.in_window[0]].ts < start:
            c = self.in_window.popleft()
            self.window_ids.discard(c)
            report.expired.append(c)
            candidates.append(c)
            child = self.elements[c]
            for r in child.refs:
                if c in self.influenced_by.get(r, ()):
                    self._drop_referrer(r, child)
                    report.changed.add(r)
                    candidates.append(r)

        for eid in dict.fromkeys(candidates):
            if eid in self.elements and eid not in self.window_ids and eid not in self.influenced_by:
                self.archive[eid] = self.elements.pop(eid)
                report.evicted.append(eid)
        report.changed.difference_update(report.evicted)

        if report.dangling:
            self.dangling += report.dangling
            log.warning("dropped %d dangling references at t=%d", report.dangling, self.now)
        return report

    def advance_to(self, t: int) -> list[UpdateReport]:
        """Process empty buckets until ``now >= t``."""
        reports = []
        while self.now < t:
            reports.append(self.ingest_bucket(()))
        return reports

    def snapshot(self) -> "Snapshot":
        return Snapshot(self)


_EMPTY: dict = {}


class Snapshot:
    """Read-only view of an ActiveStore, valid until the store's next ingest.

    Accessors do not re-check validity on every call; engines call
    :meth:`ensure_current` at query boundaries.
    """

    def __init__(self, store: ActiveStore):
        self._store = store
        self.version = store.version
        self.now = store.now
        self.cfg = store.cfg

    def ensure_current(self) -> None:
        if self._store.version != self.version:
            raise StaleSnapshot(
                f"snapshot of t={self.now} outlived an ingest (store is at t={self._store.now})")

    def element(self, eid: int) -> Element:
        return self._store.elements[eid]

    def influenced(self, eid: int):
        return self._store.influenced_by.get(eid, _EMPTY).keys()

    def influence_mass(self, eid: int, i: int) -> float:
        return self._store.infl_mass.get(eid, _EMPTY).get(i, 0.0)

    def last_ref(self, eid: int) -> int:
        """t_e: the latest time e was posted or referred to within the window."""
        stamps = list(self._store.influenced_by.get(eid, _EMPTY).values())
        if eid in self._store.window_ids:
            stamps.append(self._store.elements[eid].ts)
        return max(stamps)

    def __contains__(self, eid: int) -> bool:
        return eid in self._store.elements

    def __len__(self) -> int:
        return len(self._store.elements)

    @property
    def n_t(self) -> int:
        return len(self._store.elements)

    def active_ids(self) -> list[int]:
        return sorted(self._store.elements)

    def window_ids(self) -> list[int]:
        return sorted(self._store.window_ids)

    def window_elements(self) -> dict[int, Element]:
        els = self._store.elements
        return {c: els[c] for c in self._store.window_ids}

    def contents(self) -> tuple:
        """Canonical, comparable rendering of A_t, W_t and I_t."""
        return (
            self.now,
            tuple(self.active_ids()),
            tuple(self.window_ids()),
            tuple(sorted((e, tuple(sorted(refs)))
                         for e, refs in self._store.influenced_by.items())),
        )
