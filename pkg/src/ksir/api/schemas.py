"""Wire models for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional, Union

from pydantic import BaseModel, Field


class ErrorResponse(BaseModel):
    code: str
    detail: str


class IngestRequest(BaseModel):
    records: list[dict[str, Any]] = Field(default_factory=list)
    until: Optional[int] = Field(None, description="close every bucket up to this time")

    model_config = {
        "json_schema_extra": {
            "examples": [{
                "records": [{"id": 1, "ts": 1, "words": [[0, 1], [3, 2]], "refs": [],
                             "topics": [[0, 0.6], [1, 0.4]]}],
                "until": 1,
            }]
        }
    }


class IngestResponse(BaseModel):
    now: int
    buckets: int
    inserted: int
    evicted: int
    n_active: int
    seconds: float


class AdvanceRequest(BaseModel):
    t: int


class QueryRequest(BaseModel):
    k: int
    epsilon: float = 0.1
    engine: str = "mttd"
    vector: Optional[Union[list[float], dict[int, float]]] = None
    keywords: Optional[list[int]] = None
    words: Optional[list[str]] = Field(None, description="surface forms, resolved through the dictionary")
    at: Optional[int] = Field(None, description="must match the current update time when given")
    trace: bool = False

    model_config = {
        "json_schema_extra": {
            "examples": [{"k": 2, "epsilon": 0.3, "engine": "mttd", "vector": [0.5, 0.5]}]
        }
    }


class QueryResponse(BaseModel):
    engine: str
    members: list[int]
    score: float
    evaluated: int
    n_t: int
    now: int
    elapsed: float
    trace: Optional[list[dict[str, Any]]] = None


class StatsResponse(BaseModel):
    now: int
    lam: float
    eta: float
    window_len: int
    bucket_len: int
    n_active: int
    n_window: int
    buckets: int
    dangling_refs: int
    mean_update_seconds_per_element: float
    max_bucket_seconds_per_element: float


class CheckResponse(BaseModel):
    ok: bool
    checked: int
    max_drift: float
    missing: list[tuple[int, int]]
    extra: list[tuple[int, int]]
    order_violations: list[tuple[int, int]]
    drifted: list[tuple[int, int, float]]
