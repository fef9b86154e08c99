"""Command line front end.

Every stream and query command talks to the HTTP service: to a running one
with ``--server URL``, otherwise to an in-process instance built from
``--model`` (and ``--stream``) so both paths share the same requests.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import KsirError

CHUNK = 5000


class CliError(Exception):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail


class Client:
    def __init__(self, server: str | None = None, app=None):
        if server:
            import httpx
            self._http = httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
        else:
            import warnings
            with warnings.catch_warnings():
                warnings.filterwarnings("ignore", message=".*httpx.*")
                from fastapi.testclient import TestClient
            self._http = TestClient(app)

    def call(self, method: str, path: str, body: dict | None = None) -> dict:
        resp = self._http.request(method, path, json=body)
        try:
            data = resp.json()
        except ValueError:
            data = {"code": "http_error", "detail": resp.text}
        if resp.status_code >= 400:
            if isinstance(data, dict) and "code" in data:
                raise CliError(data["code"], str(data.get("detail")))
            raise CliError(f"http_{resp.status_code}", json.dumps(data))
        return data


def _engine_from_args(args):
    from .core import ScoringConfig, TopicModel
    from .service import StreamEngine

    if not args.model:
        raise CliError("usage", "--model is required unless --server is given")
    model = TopicModel.load(args.model)
    cfg = ScoringConfig(args.lam, args.eta, args.window, args.bucket)
    return StreamEngine(model, cfg)


def _local_client(args) -> Client:
    from .api import create_app
    from .core import load_dictionary

    engine = _engine_from_args(args)
    vocab = load_dictionary(args.dict) if getattr(args, "dict", None) else None
    return Client(app=create_app(engine, vocab))


def _client(args) -> Client:
    return Client(server=args.server) if args.server else _local_client(args)


def _bucket_end(ts: int, now: int, L: int) -> int:
    start = now % L
    return start + -(-(ts - start) // L) * L


def _replay(client: Client, path: str, until: int | None = None) -> list[dict]:
    """Push records with ts <= until, cut at bucket boundaries; returns one reply per request."""
    from .core import read_records

    records = [r for r in read_records(path) if until is None or r.get("ts", 0) <= until]
    records.sort(key=lambda r: (r.get("ts", 0), r.get("id", 0)))
    stats = client.call("GET", "/stats")
    now, L = stats["now"], stats["bucket_len"]
    replies: list[dict] = []
    chunk: list[dict] = []
    for pos, rec in enumerate(records):
        chunk.append(rec)
        end = _bucket_end(rec.get("ts", 0), now, L)
        nxt = records[pos + 1] if pos + 1 < len(records) else None
        at_boundary = nxt is None or _bucket_end(nxt.get("ts", 0), now, L) != end
        if at_boundary and len(chunk) >= CHUNK:
            replies.append(client.call("POST", "/elements", {"records": chunk, "until": end}))
            chunk = []
    if chunk:
        end = _bucket_end(chunk[-1].get("ts", 0), now, L)
        replies.append(client.call("POST", "/elements", {"records": chunk, "until": end}))
    if until is not None:
        replies.append(client.call("POST", "/advance", {"t": until}))
    return replies


def _parse_vector(text: str) -> list[float] | dict[int, float]:
    """``0.5,0.5`` (dense) or ``0:0.5,3:0.5`` (sparse)."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        if any(":" in p for p in parts):
            return {int(i): float(v) for i, v in (p.split(":", 1) for p in parts)}
        return [float(p) for p in parts]
    except ValueError:
        raise CliError("invalid_query", f"cannot parse vector {text!r}") from None


def cmd_gen(args) -> int:
    from .harness import GenParams, gen_stream

    params = GenParams(n=args.n, z=args.z, m=args.m, skew=args.skew, rate=args.rate,
                       ref_prob=args.ref_prob, max_refs=args.max_refs, recency=args.recency,
                       seed=args.seed)
    paths = gen_stream(params, args.out)
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return 0


def cmd_ingest(args) -> int:
    client = _client(args)
    replies = _replay(client, args.stream, args.until)
    stats = client.call("GET", "/stats")
    inserted = sum(r["inserted"] for r in replies)
    print(f"ingested {inserted} elements in {stats['buckets']} buckets; t={stats['now']} "
          f"active={stats['n_active']} window={stats['n_window']} dangling_refs={stats['dangling_refs']}")
    print(f"update time per element: mean {stats['mean_update_seconds_per_element'] * 1e3:.4f} ms, "
          f"worst bucket {stats['max_bucket_seconds_per_element'] * 1e3:.4f} ms")
    return 0


def cmd_query(args) -> int:
    if (args.vector is None) == (args.keywords is None):
        raise CliError("usage", "give exactly one of --vector or --keywords")
    client = _client(args)
    if not args.server:
        if not args.stream:
            raise CliError("usage", "--stream is required unless --server is given")
        _replay(client, args.stream, args.at)
    body: dict = {"k": args.k, "epsilon": args.epsilon, "engine": args.engine, "trace": args.trace}
    if args.server and args.at is not None:
        body["at"] = args.at
    if args.vector is not None:
        body["vector"] = _parse_vector(args.vector)
    else:
        items = [w.strip() for w in args.keywords.split(",") if w.strip()]
        if all(w.lstrip("-").isdigit() for w in items):
            body["keywords"] = [int(w) for w in items]
        else:
            body["words"] = items
    res = client.call("POST", "/query", body)
    if args.json:
        print(json.dumps(res, sort_keys=True))
        return 0
    print("members " + ",".join(f"e{m}" for m in sorted(res["members"])))
    print(f"score {res['score']:.4f}")
    print(f"engine {res['engine']} t={res['now']} evaluated {res['evaluated']}/{res['n_t']} "
          f"elapsed {res['elapsed'] * 1e3:.3f} ms")
    for event in res.get("trace") or []:
        print("trace " + json.dumps(event, sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    from .harness import BenchConfig, run_bench

    cfg = BenchConfig.load(args.config, out=args.out, queries=args.queries, k=args.k,
                           epsilon=args.epsilon, eta=args.eta, lam=args.lam, seed=args.seed,
                           engines=args.engines)
    report = run_bench(cfg)
    paths = report.write(cfg.out)
    for name, s in sorted(report.summary.get("engines", {}).items()):
        ratio = s["mean_score_ratio_vs_celf"]
        print(f"{name:6s} median {s['median_latency'] * 1e3:9.3f} ms  "
              f"score/celf {'-' if ratio is None else f'{ratio:.4f}'}  "
              f"evaluated {s['mean_evaluated_ratio']:.4f}")
    upd = report.summary.get("update", {})
    if upd:
        print(f"update {upd['mean_seconds_per_element'] * 1e3:.4f} ms/element over {upd['elements']} elements")
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return 0


def cmd_check(args) -> int:
    if args.server:
        rep = Client(server=args.server).call("GET", "/check")
        print(f"{'ok' if rep['ok'] else 'FAIL'}\tranked_lists\tchecked {rep['checked']}, "
              f"max drift {rep['max_drift']:.3g}")
        return 0 if rep["ok"] else 1

    from .api import create_app
    from .harness.checks import run_checks

    engine = _engine_from_args(args)
    _replay(Client(app=create_app(engine)), args.stream, args.at)
    outcomes = run_checks(engine, samples=args.samples, seed=args.seed)
    for o in outcomes:
        print(f"{'ok' if o.ok else 'FAIL'}\t{o.name}\t{o.detail}")
    return 0 if all(o.ok for o in outcomes) else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app
    from .core import load_dictionary

    engine = _engine_from_args(args)
    vocab = load_dictionary(args.dict) if args.dict else None
    app = create_app(engine, vocab)
    if args.stream:
        _replay(Client(app=app), args.stream)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _engine_args(p: argparse.ArgumentParser, stream: bool = True) -> None:
    p.add_argument("--model", help="topic model file")
    if stream:
        p.add_argument("--stream", help="line-delimited element records")
    p.add_argument("--dict", help="word dictionary sidecar")
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("-T", "--window", type=int, default=86400, help="window length")
    p.add_argument("-L", "--bucket", type=int, default=900, help="bucket length")
    p.add_argument("--server", help="base URL of a running service")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ksir", description="k-representative queries over social streams")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic stream")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--z", type=int, default=10)
    p.add_argument("--m", type=int, default=2000)
    p.add_argument("--skew", type=float, default=0.8)
    p.add_argument("--rate", type=int, default=1)
    p.add_argument("--ref-prob", type=float, default=0.9)
    p.add_argument("--max-refs", type=int, default=5)
    p.add_argument("--recency", type=int, default=2000)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest", help="validate and replay a stream, report update times")
    _engine_args(p, stream=False)
    p.add_argument("--stream", required=True)
    p.add_argument("--until", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="one-shot k-representative query")
    _engine_args(p)
    p.add_argument("--at", type=int, help="query time; local mode replays the stream up to it")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--engine", default="mttd")
    p.add_argument("--keywords", help="comma-separated word ids or dictionary words")
    p.add_argument("--vector", help="topic weights: dense 0.5,0.5 or sparse 0:0.5,3:0.5")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="replay a stream under a query workload")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--queries", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--engines")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="integrity check and invariant suite")
    _engine_args(p)
    p.add_argument("--at", type=int)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("serve", help="run the HTTP service")
    _engine_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        code, detail = exc.code, exc.detail
    except KsirError as exc:
        code, detail = exc.code, str(exc)
    except (FileNotFoundError, ValueError) as exc:
        code, detail = type(exc).__name__.lower(), str(exc)
    except Exception as exc:  # transport failures and the like
        code, detail = "unexpected", f"{type(exc).__name__}: {exc}"
    print(f"error code={code} detail={json.dumps(detail)}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
