"""Reference pool construction: execution-verified SQL variants per question.

Candidates sampled upstream (e.g. a distilled model at temperature 1.0) are
executed against the question's database; only those whose denotation
matches the gold query are retained. The gold SQL is always part of the
effective pool. Pools flag questions whose gold result set is empty, since
vacuous predicates can spuriously "match" there.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .executor import (
    DEFAULT_EVAL_TIMEOUT_MS,
    GoldExecutionFailed,
    denotation_match,
    execute_sql,
)


@dataclass
class ReferencePool:
    gold: str
    variants: list[str] = field(default_factory=list)
    question_id: str = ""
    db_id: str = ""
    empty_gold_flag: bool = False

    def references(self) -> list[str]:
        """Gold first, then the verified variants."""
        return [self.gold] + self.variants

    def size(self) -> int:
        return 1 + len(self.variants)

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "db_id": self.db_id,
            "gold": self.gold,
            "variants": list(self.variants),
            "empty_gold": self.empty_gold_flag,
        }

    @classmethod
    def from_json(cls, row: dict) -> "ReferencePool":
        return cls(
            gold=row["gold"],
            variants=list(row.get("variants", [])),
            question_id=row.get("question_id", ""),
            db_id=row.get("db_id", ""),
            empty_gold_flag=bool(row.get("empty_gold", False)),
        )


def _normalize_text(sql: str) -> str:
    """Whitespace-collapsed text form used for exact-duplicate detection."""
    return re.sub(r"\s+", " ", sql.strip().rstrip(";").strip())


def build_reference_pool(gold: str, candidates: Iterable[str], db_path: str,
                         timeout_ms: int = DEFAULT_EVAL_TIMEOUT_MS,
                         question_id: str = "", db_id: str = "") -> ReferencePool:
    """Execute candidates, keep denotation matches, dedup identical texts."""
    gold_res = execute_sql(db_path, gold, timeout_ms)
    if not gold_res.ok:
        raise GoldExecutionFailed(gold_res.error_message or "gold failed")
    gold_rows = gold_res.rows or []

    seen = {_normalize_text(gold)}
    variants: list[str] = []
    for cand in candidates:
        if not cand or not cand.strip():
            continue
        key = _normalize_text(cand)
        if key in seen:
            continue
        res = execute_sql(db_path, cand, timeout_ms)
        if not res.ok:
            continue
        if denotation_match(res.rows or [], gold_rows):
            variants.append(cand)
            seen.add(key)

    return ReferencePool(
        gold=gold,
        variants=variants,
        question_id=question_id,
        db_id=db_id,
        empty_gold_flag=len(gold_rows) == 0,
    )


@dataclass
class AuditReport:
    empty_gold_count: int
    total: int
    ratio: float
    flagged_question_ids: list[str]

    def as_dict(self) -> dict:
        return {
            "empty_gold_count": self.empty_gold_count,
            "total": self.total,
            "ratio": self.ratio,
            "flagged_question_ids": list(self.flagged_question_ids),
        }


def audit_pools(pools: Iterable[ReferencePool]) -> AuditReport:
    """Advisory empty-gold-result audit; pools are never auto-pruned."""
    pools = list(pools)
    flagged = [p.question_id for p in pools if p.empty_gold_flag]
    total = len(pools)
    return AuditReport(
        empty_gold_count=len(flagged),
        total=total,
        ratio=len(flagged) / total if total else 0.0,
        flagged_question_ids=flagged,
    )


def save_pools(pools: Iterable[ReferencePool], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for pool in pools:
            f.write(json.dumps(pool.to_json()) + "\n")


def load_pools(path: str) -> dict[str, ReferencePool]:
    """Pools keyed by question_id from a JSONL sidecar."""
    pools: dict[str, ReferencePool] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            pool = ReferencePool.from_json(json.loads(line))
            pools[pool.question_id] = pool
    return pools
