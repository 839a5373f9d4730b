"""Batch reward-scoring service: the core shared by stdio and HTTP transports."""

from __future__ import annotations

import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .config import EngineConfig
from .enrichment import ReferencePool, load_pools
from .executor import (
    DbNotFound,
    GoldExecutionFailed,
    configure_db_concurrency,
    resolve_db_path,
    schema_columns,
)
from .memory import MemoryBank, RetrievalScope, make_embedder
from .rewards import (
    GoldCache,
    SHAPING_PRESETS,
    ScoreContext,
    composite_reward,
)

logger = logging.getLogger(__name__)


class PoolMissing(Exception):
    """A pool_key referenced a pool that is not loaded."""


class BadRequest(Exception):
    """Request object missing required fields."""


@dataclass
class ScoreRequest:
    id: str
    question_id: str
    db_id: str
    rollout: str
    gold_sql: Optional[str] = None
    pool: Optional[dict] = None        # inline {"gold": ..., "variants": [...]}
    pool_key: Optional[str] = None     # question_id key into the loaded pool file
    config_overrides: Optional[dict] = None

    @classmethod
    def from_dict(cls, row: dict) -> "ScoreRequest":
        try:
            return cls(
                id=str(row["id"]),
                question_id=str(row.get("question_id", row["id"])),
                db_id=row["db_id"],
                rollout=row["rollout"],
                gold_sql=row.get("gold_sql"),
                pool=row.get("pool"),
                pool_key=row.get("pool_key"),
                config_overrides=row.get("config_overrides"),
            )
        except KeyError as exc:
            raise BadRequest(f"missing field {exc.args[0]!r}") from exc


class RewardService:
    """Holds the bank, pools, caches, and config; scores request batches."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.embedder = make_embedder(
            config.embedding_provider,
            dim=config.embedding_dim,
            url=config.embedding_url,
            path=config.embedding_file,
        )
        if config.bank_path and os.path.isfile(config.bank_path):
            self.bank = MemoryBank.load(config.bank_path)
        else:
            self.bank = MemoryBank(dim=config.embedding_dim)
        self.pools: dict[str, ReferencePool] = {}
        if config.pool_path and os.path.isfile(config.pool_path):
            self.pools = load_pools(config.pool_path)
        self.gold_cache = GoldCache()
        self._schema_cache: dict[str, list[str]] = {}
        configure_db_concurrency(config.per_db_concurrency)

    # -- helpers -------------------------------------------------------------

    def _resolve_pool(self, req: ScoreRequest) -> ReferencePool:
        if req.pool:
            return ReferencePool.from_json({
                "gold": req.pool.get("gold") or req.gold_sql,
                "variants": req.pool.get("variants", []),
                "question_id": req.question_id,
                "db_id": req.db_id,
                "empty_gold": req.pool.get("empty_gold", False),
            })
        if req.pool_key is not None:
            pool = self.pools.get(str(req.pool_key))
            if pool is None:
                raise PoolMissing(str(req.pool_key))
            return pool
        pool = self.pools.get(req.question_id)
        if pool is not None:
            return pool
        if req.gold_sql:
            return ReferencePool(gold=req.gold_sql, question_id=req.question_id,
                                 db_id=req.db_id)
        raise BadRequest("request has neither gold_sql, pool, nor a loadable pool_key")

    def _schema_cols(self, db_path: str) -> list[str]:
        cols = self._schema_cache.get(db_path)
        if cols is None:
            cols = schema_columns(db_path)
            self._schema_cache[db_path] = cols
        return cols

    # -- scoring ---------------------------------------------------------------

    def score_request(self, req: ScoreRequest) -> dict:
        start = time.monotonic()
        try:
            cfg = self.config.merged(req.config_overrides)
            db_path = resolve_db_path(cfg.db_root, req.db_id)
            pool = self._resolve_pool(req)
            ctx = ScoreContext(
                db_path=db_path,
                db_id=req.db_id,
                pool=pool,
                bank=self.bank,
                embedder=self.embedder,
                params=SHAPING_PRESETS[cfg.preset],
                k=cfg.k,
                scope=RetrievalScope(cfg.scope),
                memory_insert=cfg.memory_insert,
                timeout_ms=cfg.score_timeout_ms,
                schema_cols=self._schema_cols(db_path),
            )
            result = composite_reward(req.rollout, ctx, gold_cache=self.gold_cache)
            b = result.breakdown
            return {
                "id": req.id,
                "breakdown": {
                    "format": b.format,
                    "exec": b.exec,
                    "atomic": b.atomic,
                    "memory": b.memory,
                    "total": b.total,
                },
                "outcome": b.outcome.value,
                "memory_action": result.memory_action,
                "elapsed_ms": (time.monotonic() - start) * 1000.0,
            }
        except (DbNotFound, GoldExecutionFailed, PoolMissing, BadRequest) as exc:
            return self._error_response(req.id, exc, start)
        except Exception as exc:  # crash isolation: a poisoned item never aborts a batch
            logger.exception("scoring failed for request %s", req.id)
            return self._error_response(req.id, exc, start)

    @staticmethod
    def _error_response(req_id: Optional[str], exc: Exception, start: float) -> dict:
        return {
            "id": req_id,
            "error": {"type": type(exc).__name__, "message": str(exc)},
            "elapsed_ms": (time.monotonic() - start) * 1000.0,
        }

    def score_batch(self, requests: list[dict]) -> list[dict]:
        """Score a batch; responses preserve request order, errors stay per-item."""
        parsed: list = []
        for row in requests:
            try:
                parsed.append(ScoreRequest.from_dict(row))
            except (BadRequest, TypeError) as exc:
                parsed.append(exc if isinstance(exc, BadRequest) else BadRequest(str(exc)))

        def run(item):
            if isinstance(item, BadRequest):
                return self._error_response(None, item, time.monotonic())
            return self.score_request(item)

        workers = max(1, min(self.config.parallelism, len(parsed) or 1))
        if workers == 1:
            return [run(item) for item in parsed]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, parsed))

    # -- memory surface ---------------------------------------------------------

    def memory_insert(self, trace: str, db_id: str) -> dict:
        db_path = resolve_db_path(self.config.db_root, db_id)
        result = self.bank.insert(trace, db_id, self._schema_cols(db_path), self.embedder)
        return {
            "action": result.action,
            "reason": result.reason,
            "similarity": result.similarity,
            "entry_id": result.entry_id,
            "bank_size": len(self.bank),
        }

    def memory_stats(self) -> dict:
        return {
            "bank_size": len(self.bank),
            "dims": self.bank.dim,
            "scope_default": self.config.scope,
        }

    def snapshot(self) -> Optional[str]:
        """Flush the bank to its configured snapshot path, if any."""
        if self.config.bank_path:
            self.bank.save(self.config.bank_path)
            return self.config.bank_path
        return None


def serve_stdio(service: RewardService, stdin=None, stdout=None) -> None:
    """One JSON ScoreRequest per line in, one JSON response per line out."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            response = {"id": None, "error": {"type": "BadRequest",
                                              "message": f"malformed JSON: {exc}"}}
            print(json.dumps(response), file=stdout, flush=True)
            continue
        try:
            req = ScoreRequest.from_dict(row)
            response = service.score_request(req)
        except BadRequest as exc:
            response = {"id": row.get("id"), "error": {"type": "BadRequest",
                                                       "message": str(exc)}}
        print(json.dumps(response), file=stdout, flush=True)
    service.snapshot()
