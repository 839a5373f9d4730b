"""Fine-grained reward engine and evaluation harness for Text-to-SQL RL."""

__version__ = "0.1.0"

from .atomic import AtomicOp, AtomicOpSet, decompose, jaccard
from .config import EngineConfig, load_config
from .enrichment import ReferencePool, audit_pools, build_reference_pool
from .executor import (
    ExecutionResult,
    Outcome,
    Status,
    classify_outcome,
    denotation_match,
    execute_sql,
)
from .memory import MemoryBank, RetrievalScope, StubEmbedder, cosine, quality_gate
from .rewards import (
    RewardBreakdown,
    SHAPING_PRESETS,
    ScoreContext,
    ShapingParams,
    composite_reward,
    parse_rollout,
    shape,
)
from .selection import evaluate_dataset, group_by_execution, majority_vote, self_bleu
from .service import RewardService, ScoreRequest
from .sqlast import ParseError, parse_sql

__all__ = [
    "AtomicOp",
    "AtomicOpSet",
    "EngineConfig",
    "ExecutionResult",
    "MemoryBank",
    "Outcome",
    "ParseError",
    "ReferencePool",
    "RetrievalScope",
    "RewardBreakdown",
    "RewardService",
    "SHAPING_PRESETS",
    "ScoreContext",
    "ScoreRequest",
    "ShapingParams",
    "Status",
    "StubEmbedder",
    "audit_pools",
    "build_reference_pool",
    "classify_outcome",
    "composite_reward",
    "cosine",
    "decompose",
    "denotation_match",
    "evaluate_dataset",
    "execute_sql",
    "group_by_execution",
    "jaccard",
    "load_config",
    "majority_vote",
    "parse_rollout",
    "parse_sql",
    "quality_gate",
    "self_bleu",
    "shape",
]
