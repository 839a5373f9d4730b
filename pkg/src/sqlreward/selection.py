"""Inference-time candidate selection and evaluation metrics.

Candidates are grouped by execution denotation; majority voting picks the
largest group (ties to the group holding the earliest-sampled candidate).
Metrics: execution accuracy of the voted SQL, Pass@K over all candidates,
mean execution-group counts, and Self-BLEU trace diversity.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .executor import (
    DEFAULT_EVAL_TIMEOUT_MS,
    GoldExecutionFailed,
    denotation_match,
    execute_sql,
    normalize_row,
)
from .sqlast import ParseError, parse_sql


class TooFewTraces(ValueError):
    """Self-BLEU needs at least two traces."""


# ---------------------------------------------------------------------------
# Execution grouping


def denotation_key(rows: Sequence[Sequence]) -> str:
    """Order-free canonical hash of a result row set."""
    serialized = sorted(_serialize_row(normalize_row(r)) for r in rows)
    digest = hashlib.sha256("\n".join(serialized).encode()).hexdigest()
    return digest


def _serialize_row(row: Sequence) -> str:
    parts = []
    for v in row:
        if v is None:
            parts.append("∅")
        elif isinstance(v, bytes):
            parts.append("b:" + v.hex())
        elif isinstance(v, str):
            parts.append("s:" + v)
        else:
            parts.append("n:" + repr(v))
    return "\x1f".join(parts)


@dataclass
class ExecutionGroup:
    denotation_key: str
    members: list[int] = field(default_factory=list)  # candidate indices, in order


@dataclass
class ExecutionGroups:
    groups: list[ExecutionGroup] = field(default_factory=list)
    failed: list[int] = field(default_factory=list)

    def sizes(self) -> list[int]:
        return [len(g.members) for g in self.groups]


def group_by_execution(candidates: Sequence[str], db_path: str,
                       timeout_ms: int = DEFAULT_EVAL_TIMEOUT_MS) -> ExecutionGroups:
    """Execute every candidate and cluster the successes by denotation."""
    out = ExecutionGroups()
    by_key: dict[str, ExecutionGroup] = {}
    for idx, sql in enumerate(candidates):
        if not sql or not sql.strip():
            out.failed.append(idx)
            continue
        res = execute_sql(db_path, sql, timeout_ms)
        if not res.ok:
            out.failed.append(idx)
            continue
        key = denotation_key(res.rows or [])
        group = by_key.get(key)
        if group is None:
            group = ExecutionGroup(denotation_key=key)
            by_key[key] = group
            out.groups.append(group)
        group.members.append(idx)
    return out


# ---------------------------------------------------------------------------
# Majority vote


@dataclass
class VoteResult:
    sql: str
    index: int
    no_executable: bool = False


def majority_vote(groups: ExecutionGroups, candidates: Sequence[str]) -> VoteResult:
    """Pick the earliest member of the largest group.

    Ties break toward the group containing the earliest-sampled candidate.
    If nothing executed, fall back to the first parseable candidate, else
    the first candidate verbatim, flagged NoExecutable.
    """
    if groups.groups:
        best = max(groups.groups, key=lambda g: (len(g.members), -min(g.members)))
        chosen = min(best.members)
        return VoteResult(sql=candidates[chosen], index=chosen)
    for idx, sql in enumerate(candidates):
        try:
            parse_sql(sql)
        except ParseError:
            continue
        return VoteResult(sql=sql, index=idx, no_executable=True)
    return VoteResult(sql=candidates[0] if candidates else "", index=0,
                      no_executable=True)


# ---------------------------------------------------------------------------
# Metrics


def ex_metric(chosen: str, gold: str, db_path: str,
              timeout_ms: int = DEFAULT_EVAL_TIMEOUT_MS) -> int:
    """1 iff the chosen SQL denotation-matches gold."""
    gold_res = execute_sql(db_path, gold, timeout_ms)
    if not gold_res.ok:
        raise GoldExecutionFailed(gold_res.error_message or "gold failed")
    pred_res = execute_sql(db_path, chosen, timeout_ms)
    if not pred_res.ok:
        return 0
    return int(denotation_match(pred_res.rows or [], gold_res.rows or []))


def pass_at_k(candidates: Sequence[str], gold: str, db_path: str,
              timeout_ms: int = DEFAULT_EVAL_TIMEOUT_MS) -> int:
    """1 iff at least one candidate denotation-matches gold."""
    gold_res = execute_sql(db_path, gold, timeout_ms)
    if not gold_res.ok:
        raise GoldExecutionFailed(gold_res.error_message or "gold failed")
    gold_rows = gold_res.rows or []
    for sql in candidates:
        if not sql or not sql.strip():
            continue
        res = execute_sql(db_path, sql, timeout_ms)
        if res.ok and denotation_match(res.rows or [], gold_rows):
            return 1
    return 0


def mean_exec_groups(per_question: Iterable[ExecutionGroups]) -> float:
    """Mean count of non-failed execution groups per question."""
    counts = [len(g.groups) for g in per_question]
    if not counts:
        return 0.0
    return sum(counts) / len(counts)


# ---------------------------------------------------------------------------
# BLEU / Self-BLEU


def _ngrams(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i:i + order]) for i in range(len(tokens) - order + 1))


def bleu(hypothesis: str, references: Sequence[str], max_order: int = 4) -> float:
    """Sentence BLEU: uniform weights, add-one smoothing above unigrams."""
    hyp = hypothesis.split()
    refs = [r.split() for r in references if r.split()]
    if not hyp or not refs:
        return 0.0
    log_sum = 0.0
    for order in range(1, max_order + 1):
        hyp_counts = _ngrams(hyp, order)
        total = sum(hyp_counts.values())
        max_ref: Counter = Counter()
        for ref in refs:
            for gram, count in _ngrams(ref, order).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        clipped = sum(min(count, max_ref[gram]) for gram, count in hyp_counts.items())
        if order == 1:
            if clipped == 0:
                return 0.0
            precision = clipped / total
        else:
            precision = (clipped + 1) / (total + 1)
        log_sum += math.log(precision) / max_order
    hyp_len = len(hyp)
    ref_len = min((abs(len(r) - hyp_len), len(r)) for r in refs)[1]
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return brevity * math.exp(log_sum)


def self_bleu(traces: Sequence[str]) -> float:
    """Mean BLEU of each trace against the other K-1; higher = less diverse."""
    if len(traces) < 2:
        raise TooFewTraces(f"need at least 2 traces, got {len(traces)}")
    scores = []
    for i, hyp in enumerate(traces):
        refs = [traces[j] for j in range(len(traces)) if j != i]
        scores.append(bleu(hyp, refs))
    return sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# Dataset-level evaluation


@dataclass
class QuestionEval:
    question_id: str
    db_id: str
    chosen_sql: str
    chosen_index: int
    no_executable: bool
    ex: int
    pass_at_k: int
    group_sizes: list[int]
    failed_count: int
    self_bleu: Optional[float] = None


@dataclass
class EvalReport:
    ex: float
    pass_at_k: float
    mean_exec_groups: float
    self_bleu: Optional[float]
    per_question: list[QuestionEval]

    def as_dict(self) -> dict:
        return {
            "ex": self.ex,
            "pass_at_k": self.pass_at_k,
            "mean_exec_groups": self.mean_exec_groups,
            "self_bleu": self.self_bleu,
            "per_question": [vars(q) for q in self.per_question],
        }


def evaluate_dataset(questions: Sequence[dict], candidate_map: dict[str, dict],
                     resolve_db, timeout_ms: int = DEFAULT_EVAL_TIMEOUT_MS) -> EvalReport:
    """Vote and score every question.

    `questions` are BIRD-style rows with question_id, db_id, and SQL (gold);
    `candidate_map` maps question_id to {"candidates": [...], "traces": [...]};
    `resolve_db` maps a db_id to a database file path.
    """
    per_question: list[QuestionEval] = []
    all_groups: list[ExecutionGroups] = []
    bleu_scores: list[float] = []

    for row in questions:
        qid = str(row["question_id"])
        db_id = row["db_id"]
        gold = row["SQL"]
        entry = candidate_map.get(qid, {})
        candidates = entry.get("candidates", [])
        traces = entry.get("traces", [])
        db_path = resolve_db(db_id)

        groups = group_by_execution(candidates, db_path, timeout_ms)
        all_groups.append(groups)
        vote = majority_vote(groups, candidates)
        ex = ex_metric(vote.sql, gold, db_path, timeout_ms) if candidates else 0
        passk = pass_at_k(candidates, gold, db_path, timeout_ms) if candidates else 0

        q = QuestionEval(
            question_id=qid,
            db_id=db_id,
            chosen_sql=vote.sql,
            chosen_index=vote.index,
            no_executable=vote.no_executable,
            ex=ex,
            pass_at_k=passk,
            group_sizes=groups.sizes(),
            failed_count=len(groups.failed),
        )
        if len(traces) >= 2:
            q.self_bleu = self_bleu(traces)
            bleu_scores.append(q.self_bleu)
        per_question.append(q)

    n = len(per_question)
    report = EvalReport(
        ex=sum(q.ex for q in per_question) / n if n else 0.0,
        pass_at_k=sum(q.pass_at_k for q in per_question) / n if n else 0.0,
        mean_exec_groups=mean_exec_groups(all_groups),
        self_bleu=sum(bleu_scores) / len(bleu_scores) if bleu_scores else None,
        per_question=per_question,
    )
    assert report.ex <= report.pass_at_k + 1e-12, "EX must never exceed Pass@K"
    return report
