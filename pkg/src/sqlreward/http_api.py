"""HTTP transport for the reward service (FastAPI)."""

from __future__ import annotations

from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI
from pydantic import BaseModel

from .service import RewardService


class ScoreBatchBody(BaseModel):
    requests: list[dict]


class MemoryInsertBody(BaseModel):
    trace: str
    db_id: str


def create_app(service: RewardService) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        service.snapshot()  # flush the bank on shutdown

    app = FastAPI(title="sqlreward", lifespan=lifespan)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "bank_size": len(service.bank)}

    @app.post("/score")
    def score(body: ScoreBatchBody):
        return {"responses": service.score_batch(body.requests)}

    @app.post("/memory/insert")
    def memory_insert(body: MemoryInsertBody):
        return service.memory_insert(body.trace, body.db_id)

    @app.get("/memory/stats")
    def memory_stats():
        return service.memory_stats()

    return app


def serve_http(service: RewardService, host: str = "127.0.0.1",
               port: int = 8731) -> None:
    import uvicorn

    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")
