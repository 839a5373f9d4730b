"""Composite reward: rollout parsing, the four components, and shaping.

The total reward is the unweighted sum of four components:

  format   0/1      output follows the <think>...</think> + SQL structure
  exec     0/1/2    fails / runs without error / results match gold
  atomic   [0, φ(1)] shaped max-Jaccard overlap with the reference pool,
                    active only when the prediction is not a match
  memory   [0, 1]   cosine of the reasoning trace against the centroid of
                    retrieved verified traces; saturates at 1 on a match

Invalid format zeroes everything downstream: no SQL is extractable.
"""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .atomic import decompose, jaccard
from .enrichment import ReferencePool
from .executor import (
    ExecutionResult,
    Outcome,
    classify_outcome,
    execute_sql,
    schema_columns,
)
from .memory import (
    EmptyRetrieval,
    MemoryBank,
    RetrievalScope,
    centroid,
    cosine,
)

logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """Shaping input outside [0, 1]."""


@dataclass(frozen=True)
class ShapingParams:
    """φ(x) = λ·x + (1−λ)·β·x^γ, monotone on [0,1] with φ(0) = 0."""

    lam: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if self.beta <= 0 or self.gamma <= 0:
            raise ValueError("beta and gamma must be positive")


SHAPING_PRESETS: dict[str, ShapingParams] = {
    "S1": ShapingParams(0.15, 1.0, 0.35),
    "S2": ShapingParams(0.30, 0.85, 0.55),
    "S3": ShapingParams(0.05, 0.79, 0.20),  # default
    "S4": ShapingParams(0.60, 0.50, 0.98),  # near linear
}
DEFAULT_PRESET = "S3"


def shape(x: float, params: ShapingParams) -> float:
    """Compress high overlap scores so near-misses earn less than matches."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"shaping input {x} outside [0, 1]")
    return params.lam * x + (1.0 - params.lam) * params.beta * (x ** params.gamma)


# ---------------------------------------------------------------------------
# Rollout parsing


@dataclass
class RolloutParse:
    raw: str
    think: Optional[str] = None
    sql: Optional[str] = None
    format_valid: bool = False


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*?)\n?```$", re.DOTALL)


def parse_rollout(text: str) -> RolloutParse:
    """Split a model output into reasoning and SQL.

    Valid iff exactly one <think>...</think> block starts the output and
    non-empty SQL follows. Code fences around the SQL are tolerated and
    stripped.
    """
    parse = RolloutParse(raw=text)
    if text is None:
        return parse
    stripped = text.strip()
    if stripped.count("<think>") != 1 or stripped.count("</think>") != 1:
        return parse
    if not stripped.startswith("<think>"):
        return parse
    end = stripped.find("</think>")
    think = stripped[len("<think>"):end].strip()
    tail = stripped[end + len("</think>"):].strip()
    fence = _FENCE_RE.match(tail)
    if fence:
        tail = fence.group(1).strip()
    if not tail:
        return parse
    parse.think = think
    parse.sql = tail
    parse.format_valid = True
    return parse


# ---------------------------------------------------------------------------
# Components


def format_reward(parse: RolloutParse) -> int:
    return 1 if parse.format_valid else 0


def execution_reward(outcome: Outcome) -> int:
    if outcome == Outcome.FAILED:
        return 0
    if outcome == Outcome.EXECUTED_MISMATCH:
        return 1
    return 2


def atomic_reward(pred_sql: str, pool: ReferencePool,
                  params: ShapingParams) -> float:
    """φ of the maximum Jaccard over all reference SQLs (gold included)."""
    pred_ops = decompose(pred_sql)
    j_max = 0.0
    for ref in pool.references():
        j_max = max(j_max, jaccard(pred_ops, decompose(ref)))
    return shape(j_max, params)


def memory_reward(parse: RolloutParse, outcome: Outcome, bank: MemoryBank,
                  db_id: str, embedder, k: int = 20,
                  scope: RetrievalScope = RetrievalScope.CROSS_DB) -> float:
    """Cosine of the trace embedding against the retrieved centroid.

    0 on invalid format, 1 on a correct execution; negatives clamp to 0.
    An empty admissible pool yields 0 so training proceeds on a cold bank.
    """
    if not parse.format_valid:
        return 0.0
    if outcome == Outcome.MATCH:
        return 1.0
    if not parse.think:
        return 0.0
    trace_vec = np.asarray(embedder.embed(parse.think), dtype=np.float64)
    retrieved = bank.retrieve(trace_vec, db_id, k=k, scope=scope)
    if not retrieved:
        logger.warning("memory reward: empty retrieval for db_id=%s", db_id)
        return 0.0
    try:
        center = centroid(retrieved)
    except EmptyRetrieval:
        return 0.0
    sim = cosine(trace_vec, center)  # cosine normalizes both sides
    return max(0.0, sim)


# ---------------------------------------------------------------------------
# Composite


@dataclass
class RewardBreakdown:
    format: int
    exec: int
    atomic: float
    memory: float
    total: float
    outcome: Outcome

    def as_dict(self) -> dict:
        return {
            "format": self.format,
            "exec": self.exec,
            "atomic": self.atomic,
            "memory": self.memory,
            "total": self.total,
            "outcome": self.outcome.value,
        }


@dataclass
class ScoreContext:
    """Everything needed to score one rollout."""

    db_path: str
    db_id: str
    pool: ReferencePool
    bank: MemoryBank
    embedder: object
    params: ShapingParams = SHAPING_PRESETS[DEFAULT_PRESET]
    k: int = 20
    scope: RetrievalScope = RetrievalScope.CROSS_DB
    memory_insert: bool = True
    timeout_ms: int = 5000
    order_sensitive: bool = False
    schema_cols: Optional[list[str]] = None


class GoldCache:
    """Gold execution results keyed by (db_path, gold_sql)."""

    def __init__(self):
        self._cache: dict[tuple[str, str], ExecutionResult] = {}
        self._lock = threading.Lock()

    def get(self, db_path: str, gold_sql: str, timeout_ms: int) -> ExecutionResult:
        key = (db_path, gold_sql)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        res = execute_sql(db_path, gold_sql, timeout_ms)
        if res.ok:
            with self._lock:
                self._cache[key] = res
        return res


_default_gold_cache = GoldCache()


@dataclass
class ScoreResult:
    breakdown: RewardBreakdown
    parse: RolloutParse
    memory_action: str = "Skipped"  # Inserted | GateRejected(reason) | Duplicate | Skipped


def composite_reward(rollout_text: str, ctx: ScoreContext,
                     gold_cache: Optional[GoldCache] = None) -> ScoreResult:
    """Parse, execute, classify, and sum the four reward components.

    On a match with memory_insert enabled, the reasoning trace is submitted
    to the bank's INSERT (gate + dedup decide whether it lands).
    """
    cache = gold_cache or _default_gold_cache
    parse = parse_rollout(rollout_text)

    if not parse.format_valid:
        breakdown = RewardBreakdown(0, 0, 0.0, 0.0, 0.0, Outcome.FAILED)
        return ScoreResult(breakdown=breakdown, parse=parse)

    gold_res = cache.get(ctx.db_path, ctx.pool.gold, ctx.timeout_ms)
    pred_res = execute_sql(ctx.db_path, parse.sql or "", ctx.timeout_ms)
    outcome = classify_outcome(pred_res, gold_res, ctx.order_sensitive)

    fmt = 1
    exec_r = execution_reward(outcome)
    atomic_r = 0.0 if outcome == Outcome.MATCH else atomic_reward(
        parse.sql or "", ctx.pool, ctx.params
    )
    mem_r = memory_reward(parse, outcome, ctx.bank, ctx.db_id, ctx.embedder,
                          k=ctx.k, scope=ctx.scope)

    memory_action = "Skipped"
    if outcome == Outcome.MATCH and ctx.memory_insert and parse.think:
        cols = ctx.schema_cols
        if cols is None:
            cols = schema_columns(ctx.db_path)
        result = ctx.bank.insert(parse.think, ctx.db_id, cols, ctx.embedder)
        if result.action == "GateRejected":
            memory_action = f"GateRejected({result.reason})"
        else:
            memory_action = result.action

    total = fmt + exec_r + atomic_r + mem_r
    breakdown = RewardBreakdown(fmt, exec_r, atomic_r, mem_r, total, outcome)
    return ScoreResult(breakdown=breakdown, parse=parse, memory_action=memory_action)
