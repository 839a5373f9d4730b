"""Sandboxed SQL execution against SQLite files and denotation matching."""

from __future__ import annotations

import os
import sqlite3
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

DEFAULT_EVAL_TIMEOUT_MS = 30_000   # evaluation runs
DEFAULT_SCORE_TIMEOUT_MS = 5_000   # inside reward scoring

_SYNTAX_MARKERS = ("syntax error", "incomplete input", "unrecognized token")


class DbNotFound(Exception):
    """Database file path does not exist or is not a file."""


class GoldExecutionFailed(Exception):
    """The gold SQL itself failed to run: corrupt fixture or dataset row."""


class Status(str, Enum):
    OK = "OK"
    SYNTAX_ERROR = "SyntaxError"
    RUNTIME_ERROR = "RuntimeError"
    TIMEOUT = "Timeout"


class Outcome(str, Enum):
    FAILED = "Failed"
    EXECUTED_MISMATCH = "ExecutedMismatch"
    MATCH = "Match"


@dataclass
class ExecutionResult:
    status: Status
    rows: Optional[list[tuple]] = None      # present iff status == OK
    elapsed_ms: float = 0.0
    error_message: Optional[str] = None     # present iff status != OK

    @property
    def ok(self) -> bool:
        return self.status == Status.OK


# optional per-database concurrency cap
_db_semaphores: dict[str, threading.BoundedSemaphore] = {}
_db_sem_lock = threading.Lock()
_db_cap: Optional[int] = None


def configure_db_concurrency(cap: Optional[int]) -> None:
    """Cap concurrent executions per database file; None removes the cap."""
    global _db_cap
    with _db_sem_lock:
        _db_cap = cap
        _db_semaphores.clear()


def _db_semaphore(db_path: str) -> Optional[threading.BoundedSemaphore]:
    if _db_cap is None:
        return None
    with _db_sem_lock:
        sem = _db_semaphores.get(db_path)
        if sem is None:
            sem = threading.BoundedSemaphore(_db_cap)
            _db_semaphores[db_path] = sem
        return sem


def execute_sql(db_path: str, sql: str, timeout_ms: int = DEFAULT_EVAL_TIMEOUT_MS) -> ExecutionResult:
    """Run one statement on a read-only connection under a timeout.

    SQL failures are encoded in the result status, never raised; only a
    missing database file raises DbNotFound.
    """
    if not os.path.isfile(db_path):
        raise DbNotFound(db_path)
    sem = _db_semaphore(db_path)
    if sem is not None:
        with sem:
            return _execute(db_path, sql, timeout_ms)
    return _execute(db_path, sql, timeout_ms)


def _execute(db_path: str, sql: str, timeout_ms: int) -> ExecutionResult:
    start = time.monotonic()

    def elapsed() -> float:
        return (time.monotonic() - start) * 1000.0

    try:
        conn = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
    except sqlite3.Error as exc:
        return ExecutionResult(Status.RUNTIME_ERROR, error_message=str(exc),
                               elapsed_ms=elapsed())

    timed_out = threading.Event()

    def on_timeout() -> None:
        timed_out.set()
        try:
            conn.interrupt()
        except Exception:
            pass

    timer = threading.Timer(timeout_ms / 1000.0, on_timeout)
    timer.start()
    try:
        cur = conn.cursor()
        cur.execute(sql)
        rows = cur.fetchall()
        if timed_out.is_set():
            return ExecutionResult(Status.TIMEOUT, error_message="interrupted",
                                   elapsed_ms=elapsed())
        return ExecutionResult(Status.OK, rows=rows, elapsed_ms=elapsed())
    except sqlite3.Warning as exc:
        # "You can only execute one statement at a time."
        return ExecutionResult(Status.SYNTAX_ERROR, error_message=str(exc),
                               elapsed_ms=elapsed())
    except sqlite3.ProgrammingError as exc:
        return ExecutionResult(Status.SYNTAX_ERROR, error_message=str(exc),
                               elapsed_ms=elapsed())
    except sqlite3.Error as exc:
        msg = str(exc)
        if timed_out.is_set() or "interrupted" in msg:
            return ExecutionResult(Status.TIMEOUT, error_message=msg,
                                   elapsed_ms=elapsed())
        if any(marker in msg for marker in _SYNTAX_MARKERS):
            return ExecutionResult(Status.SYNTAX_ERROR, error_message=msg,
                                   elapsed_ms=elapsed())
        return ExecutionResult(Status.RUNTIME_ERROR, error_message=msg,
                               elapsed_ms=elapsed())
    finally:
        timer.cancel()
        conn.close()


def normalize_value(value):
    """Collapse integer/float spellings of the same number."""
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def normalize_row(row: Sequence) -> tuple:
    return tuple(normalize_value(v) for v in row)


def denotation_match(pred_rows: list[tuple], gold_rows: list[tuple],
                     order_sensitive: bool = False) -> bool:
    """Compare two result sets; set-of-tuples by default (BIRD convention)."""
    pred = [normalize_row(r) for r in pred_rows]
    gold = [normalize_row(r) for r in gold_rows]
    if order_sensitive:
        return pred == gold
    return set(pred) == set(gold)


def classify_outcome(pred: ExecutionResult, gold: ExecutionResult,
                     order_sensitive: bool = False) -> Outcome:
    """Failed / ExecutedMismatch / Match for a prediction vs its gold run."""
    if not gold.ok:
        raise GoldExecutionFailed(gold.error_message or "gold execution failed")
    if not pred.ok:
        return Outcome.FAILED
    if denotation_match(pred.rows or [], gold.rows or [], order_sensitive):
        return Outcome.MATCH
    return Outcome.EXECUTED_MISMATCH


def schema_columns(db_path: str) -> list[str]:
    """All column names of all tables in the database (for gate metrics)."""
    if not os.path.isfile(db_path):
        raise DbNotFound(db_path)
    conn = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
    try:
        cur = conn.cursor()
        cur.execute("SELECT name FROM sqlite_master WHERE type IN ('table', 'view')")
        tables = [r[0] for r in cur.fetchall()]
        columns: list[str] = []
        for table in tables:
            cur.execute(f'PRAGMA table_info("{table}")')
            columns.extend(r[1] for r in cur.fetchall())
        return columns
    finally:
        conn.close()


def resolve_db_path(db_root: str, db_id: str) -> str:
    """Locate a database file under a BIRD/Spider-style root directory."""
    candidates = [
        os.path.join(db_root, db_id, f"{db_id}.sqlite"),
        os.path.join(db_root, db_id, f"{db_id}.db"),
        os.path.join(db_root, f"{db_id}.sqlite"),
        os.path.join(db_root, f"{db_id}.db"),
    ]
    for path in candidates:
        if os.path.isfile(path):
            return path
    raise DbNotFound(f"{db_id} under {db_root}")
