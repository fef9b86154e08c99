"""Replay a stream, fire a query workload at random times and measure every engine."""

from __future__ import annotations

import configparser
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..core import QueryVector, ScoringConfig, TopicModel, infer_query_vector, load_stream
from ..engines import Query
from ..errors import NoTopicMass
from ..baselines import ENGINES
from ..service import StreamEngine

ALL_ENGINES = ("mtts", "mttd", "celf", "sieve", "topk")


@dataclass
class BenchConfig:
    stream: str
    model: str
    out: str
    lam: float = 0.5
    eta: float = 1.0
    window_len: int = 86400
    bucket_len: int = 900
    queries: int = 100
    k: int = 10
    k_max: int | None = None
    epsilon: float = 0.1
    keywords_min: int = 1
    keywords_max: int = 5
    seed: int = 7
    engines: tuple[str, ...] = ALL_ENGINES
    t_min: int | None = None

    def __post_init__(self):
        for name in ("stream", "model"):
            if not Path(getattr(self, name)).exists():
                raise FileNotFoundError(f"{name} file {getattr(self, name)} does not exist")
        if isinstance(self.engines, str):
            self.engines = tuple(s.strip() for s in self.engines.split(",") if s.strip())
        unknown = [name for name in self.engines if name not in ENGINES]
        if unknown:
            raise ValueError(f"unknown engines {unknown}; pick from {sorted(ENGINES)}")

    @property
    def scoring(self) -> ScoringConfig:
        return ScoringConfig(self.lam, self.eta, self.window_len, self.bucket_len)

    @classmethod
    def load(cls, path: str | Path, **overrides) -> "BenchConfig":
        """Read a plain ``key = value`` document; relative paths resolve against it."""
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_string("[bench]\n" + fh.read())
        raw = dict(parser["bench"])
        base = Path(path).parent
        types = {f: t for f, t in cls.__annotations__.items()}
        kwargs: dict = {}
        for key, value in raw.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kind = types[key]
            if key in ("stream", "model", "out"):
                kwargs[key] = str((base / value).resolve()) if not Path(value).is_absolute() else value
            elif key == "engines":
                kwargs[key] = value
            elif "float" in kind:
                kwargs[key] = float(value)
            elif "int" in kind:
                kwargs[key] = None if value.lower() == "none" else int(value)
            else:
                kwargs[key] = value
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)


@dataclass
class MetricsReport:
    header: dict
    records: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    buckets: list[dict] = field(default_factory=list)

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"records": out / "records.jsonl", "summary": out / "summary.json",
                 "table": out / "records.tsv"}
        with open(paths["records"], "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        with open(paths["summary"], "w") as fh:
            json.dump({"header": self.header, "summary": self.summary,
                       "buckets": self.buckets}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        cols = ["query", "t", "k", "d", "n_t", "engine", "score", "score_ratio",
                "evaluated", "evaluated_ratio", "elapsed"]
        with open(paths["table"], "w") as fh:
            fh.write("\t".join(cols) + "\n")
            for rec in self.records:
                fh.write("\t".join(_cell(rec.get(c)) for c in cols) + "\n")
        return paths


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def make_workload(cfg: BenchConfig, model: TopicModel, t_lo: int, t_hi: int) -> list[tuple[int, Query, list[int]]]:
    """Random (time, query, keywords) triples in ascending time order."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    while len(out) < cfg.queries:
        t = int(rng.integers(t_lo, t_hi + 1))
        n_kw = int(rng.integers(cfg.keywords_min, cfg.keywords_max + 1))
        keywords = [int(w) for w in rng.integers(0, model.m, size=n_kw)]
        k = cfg.k if cfg.k_max is None else int(rng.integers(cfg.k, cfg.k_max + 1))
        try:
            x = infer_query_vector(keywords, model)
        except NoTopicMass:
            continue
        out.append((t, Query(k, x, cfg.epsilon), keywords))
    out.sort(key=lambda item: item[0])
    return out


def _semantic_influence_balance(engine: StreamEngine) -> dict:
    """Mean per-element semantic and influence terms, to guide the choice of eta."""
    snap = engine.snapshot()
    sem, infl = [], []
    for eid in snap.active_ids():
        e = snap.element(eid)
        for i, p in e.topics.items():
            sem.append(engine.scorer.semantic(e, i))
            infl.append(p * snap.influence_mass(eid, i))
    if not sem:
        return {}
    cfg = engine.cfg
    ms, mi = cfg.lam * statistics.fmean(sem), cfg.infl_weight * statistics.fmean(infl)
    return {"mean_semantic_term": ms, "mean_influence_term": mi,
            "semantic_over_influence": ms / mi if mi else math.inf,
            "eta": cfg.eta,
            "balanced_eta": (1 - cfg.lam) * statistics.fmean(infl) / ms if ms else None}


def top_share(engine: StreamEngine, fraction: float = 0.01) -> float:
    """Share of single-element score mass held by the top ``fraction`` under a uniform query."""
    snap = engine.snapshot()
    x = QueryVector.from_weights([1.0] * engine.model.z)
    scores = sorted((engine.index.delta(e, x) for e in snap.active_ids()), reverse=True)
    total = sum(scores)
    if not total:
        return 0.0
    return sum(scores[:max(1, int(len(scores) * fraction))]) / total


def run_bench(cfg: BenchConfig, workload: list[tuple[int, Query, list[int]]] | None = None) -> MetricsReport:
    """Replay the stream and run every configured engine at each query time.

    ``workload`` overrides the random one: (time, query, keywords) triples.
    """
    model = TopicModel.load(cfg.model)
    elements = load_stream(cfg.stream, model)
    elements.sort(key=lambda e: (e.ts, e.id))
    engine = StreamEngine(model, cfg.scoring)
    header = {"config": {k: v for k, v in asdict(cfg).items()}, "n_elements": len(elements),
              "z": model.z, "m": model.m}
    report = MetricsReport(header)
    if not elements:
        return report

    t_end = engine.bucket_end(elements[-1].ts)
    t_lo = cfg.t_min if cfg.t_min is not None else 1
    if workload is None:
        workload = make_workload(cfg, model, t_lo, t_end) if cfg.queries else []
    workload = sorted(workload, key=lambda item: item[0])
    pos = 0
    for qi, (t, q, keywords) in enumerate(workload):
        t = engine.bucket_end(t)
        stop = pos
        while stop < len(elements) and engine.bucket_end(elements[stop].ts) <= t:
            stop += 1
        if t > engine.now or stop > pos:
            engine.ingest(elements[pos:stop], until=max(t, engine.now))
        pos = stop
        q = Query(q.k, q.x, q.epsilon, engine.now)
        results = engine.query_many(q, cfg.engines)
        n_t = engine.snapshot().n_t
        ref = results.get("celf")
        for name, res in results.items():
            report.records.append({
                "query": qi, "t": engine.now, "k": q.k, "d": q.x.d, "n_t": n_t,
                "keywords": keywords, "engine": name, "members": list(res.members),
                "score": res.score,
                "score_ratio": res.score / ref.score if ref and ref.score > 0 else None,
                "evaluated": res.evaluated,
                "evaluated_ratio": res.evaluated / n_t if n_t else 0.0,
                "elapsed": res.elapsed,
            })
    if pos < len(elements):
        engine.ingest(elements[pos:])

    report.buckets = [asdict(b) for b in engine.history]
    report.summary = summarize(report.records, engine)
    report.summary["balance"] = _semantic_influence_balance(engine)
    report.summary["top1_share"] = top_share(engine)
    return report


def summarize(records: list[dict], engine: StreamEngine | None = None) -> dict:
    out: dict = {"engines": {}}
    by_engine: dict[str, list[dict]] = {}
    for rec in records:
        by_engine.setdefault(rec["engine"], []).append(rec)
    for name, recs in by_engine.items():
        lat = [r["elapsed"] for r in recs]
        ratios = [r["score_ratio"] for r in recs if r["score_ratio"] is not None]
        out["engines"][name] = {
            "queries": len(recs),
            "mean_latency": statistics.fmean(lat),
            "median_latency": statistics.median(lat),
            "mean_score": statistics.fmean(r["score"] for r in recs),
            "mean_score_ratio_vs_celf": statistics.fmean(ratios) if ratios else None,
            "min_score_ratio_vs_celf": min(ratios) if ratios else None,
            "mean_evaluated_ratio": statistics.fmean(r["evaluated_ratio"] for r in recs),
            "max_evaluated_ratio": max(r["evaluated_ratio"] for r in recs),
        }
    if engine is not None:
        inserted = sum(b.inserted for b in engine.history)
        seconds = sum(b.seconds for b in engine.history)
        out["update"] = {
            "buckets": len(engine.history),
            "elements": inserted,
            "total_seconds": seconds,
            "mean_seconds_per_element": seconds / inserted if inserted else 0.0,
            "mean_seconds_per_bucket": seconds / len(engine.history) if engine.history else 0.0,
        }
    return out
