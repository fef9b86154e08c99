"""HTTP front end over one :class:`~ksir.service.StreamEngine`."""

from __future__ import annotations

import math
from dataclasses import asdict

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..core import validate_element
from ..errors import InvalidQuery, KsirError, OutOfOrderBucket, StaleSnapshot, TooLarge
from ..service import StreamEngine
from .schemas import (
    AdvanceRequest,
    CheckResponse,
    ErrorResponse,
    IngestRequest,
    IngestResponse,
    QueryRequest,
    QueryResponse,
    StatsResponse,
)

_STATUS = {OutOfOrderBucket: 409, StaleSnapshot: 409, TooLarge: 413}


def _status(exc: KsirError) -> int:
    for kind, status in _STATUS.items():
        if isinstance(exc, kind):
            return status
    return 422


def _plain(value):
    """Trace events as strict JSON: string keys, lists, and null for infinities."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def create_app(engine: StreamEngine, vocab: dict[str, int] | None = None) -> FastAPI:
    app = FastAPI(title="ksir", version="0.1.0")
    app.state.engine = engine
    app.state.vocab = vocab or {}
    err = {"model": ErrorResponse}

    @app.exception_handler(KsirError)
    async def _domain_error(request: Request, exc: KsirError):
        return JSONResponse(status_code=_status(exc), content={"code": exc.code, "detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "now": engine.now}

    def _ingest(records, until) -> IngestResponse:
        elements = sorted((validate_element(r, engine.model) for r in records),
                          key=lambda e: (e.ts, e.id))
        before = len(engine.history)
        reports = engine.ingest(elements, until=until)
        spent = sum(b.seconds for b in engine.history[before:])
        return IngestResponse(now=engine.now, buckets=len(reports),
                              inserted=sum(len(r.inserted) for r in reports),
                              evicted=sum(len(r.evicted) for r in reports),
                              n_active=len(engine.store.elements), seconds=spent)

    @app.post("/elements", response_model=IngestResponse, responses={422: err, 409: err})
    def ingest(req: IngestRequest):
        return _ingest(req.records, req.until)

    @app.post("/advance", response_model=IngestResponse, responses={422: err, 409: err})
    def advance(req: AdvanceRequest):
        if req.t < engine.now:
            raise OutOfOrderBucket(f"cannot move back from t={engine.now} to t={req.t}")
        return _ingest([], req.t)

    @app.post("/query", response_model=QueryResponse, responses={422: err, 409: err, 413: err})
    def query(req: QueryRequest):
        keywords = req.keywords
        if req.words is not None:
            unknown = [w for w in req.words if w not in app.state.vocab]
            if unknown:
                raise InvalidQuery(f"words not in the dictionary: {', '.join(unknown)}")
            keywords = (keywords or []) + [app.state.vocab[w] for w in req.words]
        if keywords is not None and any(not 0 <= w < engine.model.m for w in keywords):
            raise InvalidQuery(f"keyword ids must lie in [0, {engine.model.m})")
        q = engine.make_query(req.k, req.epsilon, vector=req.vector, keywords=keywords, t=req.at)
        with engine.lock.read():
            # one read section so the reported n_t matches the snapshot queried
            res = engine.query(q, req.engine, trace=req.trace)
            n_t = engine.snapshot().n_t
        return QueryResponse(engine=res.engine, members=list(res.members), score=res.score,
                             evaluated=res.evaluated, n_t=n_t, now=engine.now,
                             elapsed=res.elapsed, trace=_plain(res.trace) if req.trace else None)

    @app.get("/stats", response_model=StatsResponse)
    def stats():
        return engine.stats()

    @app.get("/check", response_model=CheckResponse)
    def check():
        report = engine.check()
        return CheckResponse(ok=report.ok, **asdict(report))

    return app
