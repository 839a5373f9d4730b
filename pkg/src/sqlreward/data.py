"""Dataset and candidate-file ingestion (BIRD JSONL; Spider accepted via mapping)."""

from __future__ import annotations

import json
from typing import Iterable


def _rows(path: str) -> Iterable[dict]:
    """Rows from a JSONL file, or from a single JSON array file."""
    with open(path, encoding="utf-8") as f:
        head = f.read(1)
        f.seek(0)
        if head == "[":
            yield from json.load(f)
            return
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def load_dataset(path: str) -> list[dict]:
    """Normalize dataset rows to {question_id, db_id, question, evidence, SQL}."""
    out = []
    for i, row in enumerate(_rows(path)):
        sql = row.get("SQL") or row.get("query") or row.get("sql")
        if not sql or "db_id" not in row:
            raise ValueError(f"row {i} in {path} lacks SQL/query or db_id")
        out.append({
            "question_id": str(row.get("question_id", i)),
            "db_id": row["db_id"],
            "question": row.get("question", ""),
            "evidence": row.get("evidence", ""),
            "SQL": sql,
        })
    return out


def load_candidates(path: str) -> dict[str, dict]:
    """Candidate rows keyed by question_id.

    Grouped rows: {"question_id", "db_id", "candidates": [...], "traces": [...]}.
    Flat rows ({"question_id", "db_id", "sql"}) are aggregated in file order.
    """
    out: dict[str, dict] = {}
    for i, row in enumerate(_rows(path)):
        qid = str(row.get("question_id", i))
        if "candidates" in row:
            out[qid] = {
                "db_id": row.get("db_id", ""),
                "candidates": list(row["candidates"]),
                "traces": list(row.get("traces", [])),
            }
        elif "sql" in row:
            entry = out.setdefault(qid, {"db_id": row.get("db_id", ""),
                                         "candidates": [], "traces": []})
            entry["candidates"].append(row["sql"])
            if "trace" in row:
                entry["traces"].append(row["trace"])
        else:
            raise ValueError(f"row {i} in {path} has neither candidates nor sql")
    return out
