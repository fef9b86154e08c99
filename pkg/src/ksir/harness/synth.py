"""Synthetic social streams with skewed topic, word and reference popularity."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..core import TopicModel


@dataclass
class GenParams:
    n: int = 1000
    z: int = 10
    m: int = 2000
    skew: float = 0.8        # Zipf exponent; 0.8 puts ~30% of uniform-query mass on the top 1%
    rate: int = 1            # elements per time unit
    ref_prob: float = 0.9    # chance an element refers to earlier ones
    max_refs: int = 5
    recency: int = 2000      # referable horizon in elements
    attach: float = 0.95     # weight of popularity against uniform recency
    appeal_cap: int = 2000   # ceiling on an element's initial referral tickets
    words_min: int = 3
    words_max: int = 10
    seed: int = 42


def _zipf_weights(count: int, s: float) -> np.ndarray:
    w = 1.0 / np.arange(1, count + 1, dtype=float) ** s
    return w / w.sum()


def _draw(cdf: np.ndarray, rng: np.random.Generator) -> int:
    return min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(cdf) - 1)


def make_topic_model(p: GenParams, rng: np.random.Generator) -> TopicModel:
    """Each topic gets its own word block plus a thin band of shared words."""
    block = p.m // p.z
    rows = []
    for i in range(p.z):
        own = np.arange(i * block, (i + 1) * block)
        shared = rng.choice(p.m, size=max(1, block // 10), replace=False)
        shared = np.setdiff1d(shared, own)
        support = np.concatenate([rng.permutation(own), shared])
        weights = _zipf_weights(len(own), p.skew) * 0.95
        weights = np.concatenate([weights, np.full(len(shared), 0.05 / max(1, len(shared)))])
        weights /= weights.sum()
        rows.append({int(w): float(q) for w, q in zip(support, weights)})
    return TopicModel(p.z, p.m, rows)


class _Referrals:
    """Per-topic pools of referable elements.

    A new element enters with a Zipf-distributed number of tickets (its
    intrinsic appeal) and every citation adds one more, so references pile
    up on a few elements.
    """

    def __init__(self, z: int):
        self.tickets: list[list[int]] = [[] for _ in range(z)]

    def add(self, topic: int, idx: int, count: int = 1) -> None:
        self.tickets[topic].extend([idx] * count)

    def pick(self, topic: int, idx: int, p: GenParams, rng) -> int | None:
        pool = self.tickets[topic]
        horizon = idx - p.recency
        for _ in range(8):
            if not pool:
                return None
            if rng.random() < p.attach:
                cand = pool[int(rng.integers(len(pool)))]
            else:
                lo = max(0, len(pool) - 64)
                cand = pool[int(rng.integers(lo, len(pool)))]
            if cand >= horizon:
                return cand
        return None

    def prune(self, horizon: int) -> None:
        for i, pool in enumerate(self.tickets):
            if len(pool) > 4096:
                self.tickets[i] = [c for c in pool if c >= horizon]


def gen_stream(p: GenParams, out_dir: str | Path) -> dict[str, Path]:
    """Write stream.jsonl, model.txt, dict.txt and meta.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(p.seed)
    model = make_topic_model(p, rng)
    supports = [(np.fromiter(r.keys(), int), np.cumsum(np.fromiter(r.values(), float)))
                for r in model.rows]
    topic_cdf = np.cumsum(_zipf_weights(p.z, p.skew)[rng.permutation(p.z)])
    referrals = _Referrals(p.z)
    ts_of: list[int] = []
    paths = {k: out / f for k, f in
             [("stream", "stream.jsonl"), ("model", "model.txt"), ("dict", "dict.txt"), ("meta", "meta.json")]}

    with open(paths["stream"], "w") as fh:
        for idx in range(p.n):
            ts = 1 + idx // p.rate
            ts_of.append(ts)
            main = _draw(topic_cdf, rng)
            if rng.random() < 0.5:
                topics = {main: 1.0}
            else:
                other = _draw(topic_cdf, rng)
                share = float(rng.uniform(0.55, 0.95))
                topics = {main: share, other: 1.0 - share} if other != main else {main: 1.0}
            words: dict[int, int] = {}
            length = int(rng.integers(p.words_min, p.words_max + 1))
            tlist = list(topics)
            tcdf = np.cumsum([topics[i] for i in tlist])
            for _ in range(length):
                ws, cdf = supports[tlist[_draw(tcdf, rng)]]
                w = int(ws[_draw(cdf, rng)])
                words[w] = words.get(w, 0) + 1

            refs: list[int] = []
            if rng.random() < p.ref_prob:
                for _ in range(int(rng.integers(1, p.max_refs + 1))):
                    cand = referrals.pick(main, idx, p, rng)
                    if cand is not None and ts_of[cand] < ts and cand + 1 not in refs:
                        refs.append(cand + 1)
            for r in refs:
                referrals.add(main, r - 1)
            referrals.add(main, idx, min(int(rng.zipf(1.0 + p.skew)), p.appeal_cap))
            if idx % 4096 == 0:
                referrals.prune(idx - p.recency)

            record = {"id": idx + 1, "ts": ts, "words": [[w, f] for w, f in words.items()],
                      "refs": refs, "topics": [[i, q] for i, q in topics.items()]}
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")

    model.dump(paths["model"])
    with open(paths["dict"], "w") as fh:
        for w in range(p.m):
            fh.write(f"{w} w{w}\n")
    with open(paths["meta"], "w") as fh:
        json.dump({"generator": "ksir.synth", "params": asdict(p)}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
