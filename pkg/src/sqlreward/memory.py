"""Persistent reasoning memory: embeddings, retrieval, quality gates, dedup.

The bank stores verified reasoning traces with their embeddings, keyed by
database id. Retrieval is an exact full-scan cosine ranking (desk-scale
banks do not need an approximate index, and exactness keeps tests
deterministic).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_DIM = 1024
DEFAULT_TOP_K = 20
DEDUP_THRESHOLD = 0.9

# quality-gate thresholds
MIN_TOKENS = 30
MAX_TOKENS = 2000
MIN_SCHEMA_DENSITY = 0.05
MIN_DISTINCT_COLUMNS = 2
MIN_BIGRAM_UNIQUENESS = 0.60

_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)


class ProviderUnavailable(Exception):
    """Embedding provider could not produce vectors."""


class DimensionMismatch(Exception):
    """Vector width differs from the bank's configured dimension."""


class EmptyRetrieval(Exception):
    """No admissible memory entries for the requested scope."""


class RetrievalScope(str, Enum):
    CROSS_DB = "CrossDB"     # only entries from other databases
    SAME_ONLY = "SameOnly"   # only entries from the same database
    MIXED = "Mixed"          # all entries

    def admits(self, entry_db: str, query_db: str) -> bool:
        if self is RetrievalScope.CROSS_DB:
            return entry_db != query_db
        if self is RetrievalScope.SAME_ONLY:
            return entry_db == query_db
        return True


@dataclass
class MemoryEntry:
    id: str
    db_id: str
    trace: str
    embedding: np.ndarray
    source: str  # "SEED" | "STUDENT"
    created_at: str


@dataclass
class GateReport:
    accepted: bool
    reason: str  # OK | TooShort | TooLong | LowDensity | FewColumns | LowDiversity
    metrics: dict = field(default_factory=dict)


class InsertResult:
    """Outcome of a bank INSERT: Inserted(id) | GateRejected(reason) | Duplicate(sim)."""

    def __init__(self, action: str, entry_id: Optional[str] = None,
                 reason: Optional[str] = None, similarity: Optional[float] = None):
        self.action = action  # "Inserted" | "GateRejected" | "Duplicate"
        self.entry_id = entry_id
        self.reason = reason
        self.similarity = similarity

    def __repr__(self):
        return f"InsertResult({self.action}, id={self.entry_id}, reason={self.reason}, sim={self.similarity})"


# ---------------------------------------------------------------------------
# Vector helpers


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a,b) / (|a||b|); 0.0 when either norm is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def centroid(entries: Sequence[Union[MemoryEntry, np.ndarray]]) -> np.ndarray:
    """Componentwise mean of embeddings, un-normalized."""
    if not entries:
        raise EmptyRetrieval("centroid of zero entries")
    vectors = [e.embedding if isinstance(e, MemoryEntry) else np.asarray(e)
               for e in entries]
    dims = {v.shape for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed dimensions: {dims}")
    return np.mean(np.stack(vectors), axis=0)


def extract_think(text: str) -> str:
    """Reasoning content of the first <think> block, or the text itself."""
    m = _THINK_RE.search(text)
    return m.group(1).strip() if m else text.strip()


# ---------------------------------------------------------------------------
# Embedding providers


class StubEmbedder:
    """Deterministic test embedder: hashed word-bigram bag, L2-normalized.

    Tokens are padded with sentinels so one-word texts still embed.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        tokens = ["<s>"] + text.lower().split() + ["</s>"]
        vec = np.zeros(self.dim, dtype=np.float64)
        for left, right in zip(tokens, tokens[1:]):
            digest = hashlib.sha256(f"{left}\x00{right}".encode()).digest()
            index = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[index] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def embed_batch(self, texts: Iterable[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class HttpEmbedder:
    """Embeddings over HTTP: POST {"input": [...]} -> {"data": [{"embedding": [...]}]}."""

    def __init__(self, url: str, dim: int = DEFAULT_DIM, timeout_s: float = 30.0):
        self.url = url
        self.dim = dim
        self.timeout_s = timeout_s

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Iterable[str]) -> list[np.ndarray]:
        import requests

        texts = list(texts)
        try:
            resp = requests.post(self.url, json={"input": texts}, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise ProviderUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
        data = resp.json().get("data", [])
        if len(data) != len(texts):
            raise ProviderUnavailable(
                f"expected {len(texts)} embeddings, got {len(data)}"
            )
        out = []
        for item in data:
            vec = np.asarray(item["embedding"], dtype=np.float64)
            if vec.shape != (self.dim,):
                raise DimensionMismatch(f"provider returned width {vec.shape}, expected {self.dim}")
            out.append(vec)
        return out


class FileEmbedder:
    """Precomputed embeddings from a JSONL file.

    Rows carry {"embedding": [...]} plus either "text" or "id", where id is
    the sha256 hex digest of the trace text.
    """

    def __init__(self, path: str, dim: int = DEFAULT_DIM):
        self.dim = dim
        self._by_key: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                vec = np.asarray(row["embedding"], dtype=np.float64)
                if vec.shape != (self.dim,):
                    raise DimensionMismatch(
                        f"row has width {vec.shape}, expected {self.dim}"
                    )
                if "text" in row:
                    self._by_key[self.key_for(row["text"])] = vec
                if "id" in row:
                    self._by_key[row["id"]] = vec

    @staticmethod
    def key_for(text: str) -> str:
        return hashlib.sha256(text.encode()).hexdigest()

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        vec = self._by_key.get(self.key_for(text))
        if vec is None:
            raise ProviderUnavailable("no precomputed embedding for this text")
        return vec

    def embed_batch(self, texts: Iterable[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


# ---------------------------------------------------------------------------
# Quality gate


def quality_gate(trace: str, schema_columns: Sequence[str]) -> GateReport:
    """First-failure gate: length, schema density, column mentions, diversity."""
    tokens = trace.lower().split()
    token_count = len(tokens)

    cols = {c.lower() for c in schema_columns}

    mention_count = 0
    distinct: set[str] = set()
    for tok in tokens:
        if tok in cols:
            mention_count += 1
            distinct.add(tok)
        elif "." in tok:
            tail = tok.rsplit(".", 1)[-1]
            if tail in cols:
                mention_count += 1
                distinct.add(tail)

    density = mention_count / token_count if token_count else 0.0

    bigrams = list(zip(tokens, tokens[1:]))
    uniqueness = len(set(bigrams)) / len(bigrams) if bigrams else 1.0

    metrics = {
        "token_count": token_count,
        "schema_density": density,
        "distinct_columns": len(distinct),
        "bigram_uniqueness": uniqueness,
    }

    if token_count < MIN_TOKENS:
        return GateReport(False, "TooShort", metrics)
    if token_count > MAX_TOKENS:
        return GateReport(False, "TooLong", metrics)
    if density < MIN_SCHEMA_DENSITY:
        return GateReport(False, "LowDensity", metrics)
    if len(distinct) < MIN_DISTINCT_COLUMNS:
        return GateReport(False, "FewColumns", metrics)
    if uniqueness < MIN_BIGRAM_UNIQUENESS:
        return GateReport(False, "LowDiversity", metrics)
    return GateReport(True, "OK", metrics)


# ---------------------------------------------------------------------------
# Memory bank


class MemoryBank:
    """Reader-concurrent, writer-serialized store of reasoning embeddings."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim
        self._entries: list[MemoryEntry] = []
        self._matrix: Optional[np.ndarray] = None  # rebuilt lazily on insert
        self._lock = threading.RLock()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    @property
    def entries(self) -> list[MemoryEntry]:
        with self._lock:
            return list(self._entries)

    # -- INIT ----------------------------------------------------------------

    @classmethod
    def init(cls, seeds: Iterable[tuple[str, str, bool]], embedder,
             dim: Optional[int] = None) -> "MemoryBank":
        """Seed the bank from (trace, db_id, exec_correct) triples.

        Only execution-verified seeds are stored; reasoning is taken from the
        <think> block when present. Quality gates and dedup do not apply at
        INIT (they are INSERT-time checks only).
        """
        bank = cls(dim=dim or getattr(embedder, "dim", DEFAULT_DIM))
        for trace, db_id, exec_correct in seeds:
            if not exec_correct:
                continue
            reasoning = extract_think(trace)
            if not reasoning:
                continue
            vec = np.asarray(embedder.embed(reasoning), dtype=np.float64)
            bank._append(reasoning, db_id, vec, source="SEED")
        return bank

    def _append(self, trace: str, db_id: str, vec: np.ndarray, source: str) -> str:
        if vec.shape != (self.dim,):
            raise DimensionMismatch(f"vector width {vec.shape}, bank dim {self.dim}")
        with self._lock:
            entry_id = f"m{len(self._entries):06d}"
            self._entries.append(MemoryEntry(
                id=entry_id,
                db_id=db_id,
                trace=trace,
                embedding=vec,
                source=source,
                created_at=datetime.now(timezone.utc).isoformat(),
            ))
            self._matrix = None
        return entry_id

    # -- RETRIEVE --------------------------------------------------------------

    def _full_matrix(self) -> np.ndarray:
        if self._matrix is None:
            if self._entries:
                self._matrix = np.stack([e.embedding for e in self._entries])
            else:
                self._matrix = np.zeros((0, self.dim))
        return self._matrix

    def retrieve(self, query_embedding: np.ndarray, db_id: str, k: int = DEFAULT_TOP_K,
                 scope: RetrievalScope = RetrievalScope.CROSS_DB) -> list[MemoryEntry]:
        """Top-k admissible entries by cosine; ties broken oldest-first."""
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.asarray(query_embedding, dtype=np.float64)
        if query.shape != (self.dim,):
            raise DimensionMismatch(f"query width {query.shape}, bank dim {self.dim}")
        with self._lock:
            admissible = [i for i, e in enumerate(self._entries)
                          if scope.admits(e.db_id, db_id)]
            if not admissible:
                return []
            matrix = self._full_matrix()[admissible]
            entries = [self._entries[i] for i in admissible]
        norms = np.linalg.norm(matrix, axis=1)
        qnorm = float(np.linalg.norm(query))
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = matrix @ query
            denom = norms * qnorm
            sims = np.where(denom > 0, sims / np.where(denom == 0, 1, denom), 0.0)
        order = sorted(range(len(entries)), key=lambda i: (-sims[i], i))
        return [entries[i] for i in order[:k]]

    # -- INSERT ----------------------------------------------------------------

    def insert(self, trace: str, db_id: str, schema_columns: Sequence[str],
               embedder) -> InsertResult:
        """Gate, dedup against the whole bank (top-1 cosine >= 0.9), append."""
        report = quality_gate(trace, schema_columns)
        if not report.accepted:
            return InsertResult("GateRejected", reason=report.reason)
        vec = np.asarray(embedder.embed(trace), dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionMismatch(f"vector width {vec.shape}, bank dim {self.dim}")
        with self._lock:
            if self._entries:
                top1 = max(cosine(vec, e.embedding) for e in self._entries)
                if top1 >= DEDUP_THRESHOLD:
                    return InsertResult("Duplicate", similarity=top1)
            entry_id = self._append(trace, db_id, vec, source="STUDENT")
        return InsertResult("Inserted", entry_id=entry_id)

    # -- persistence -------------------------------------------------------------

    def save(self, path: str) -> None:
        """Write the snapshot atomically (write-then-rename), one JSON per line."""
        tmp = f"{path}.tmp"
        with self._lock:
            entries = list(self._entries)
        with open(tmp, "w", encoding="utf-8") as f:
            for e in entries:
                f.write(json.dumps({
                    "id": e.id,
                    "db_id": e.db_id,
                    "trace": e.trace,
                    "embedding": [float(x) for x in e.embedding],
                    "source": e.source,
                    "created_at": e.created_at,
                }) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str, dim: Optional[int] = None) -> "MemoryBank":
        entries: list[MemoryEntry] = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                entries.append(MemoryEntry(
                    id=row["id"],
                    db_id=row["db_id"],
                    trace=row["trace"],
                    embedding=np.asarray(row["embedding"], dtype=np.float64),
                    source=row.get("source", "SEED"),
                    created_at=row.get("created_at", ""),
                ))
        if entries:
            inferred = entries[0].embedding.shape[0]
        else:
            inferred = dim or DEFAULT_DIM
        bank = cls(dim=dim or inferred)
        for e in entries:
            if e.embedding.shape != (bank.dim,):
                raise DimensionMismatch(
                    f"snapshot row width {e.embedding.shape}, bank dim {bank.dim}"
                )
        bank._entries = entries
        return bank


def make_embedder(provider: str, *, dim: int = DEFAULT_DIM,
                  url: Optional[str] = None, path: Optional[str] = None):
    """Build an embedding provider from config values."""
    if provider == "stub":
        return StubEmbedder(dim=dim)
    if provider == "http":
        if not url:
            raise ValueError("http embedder requires a url")
        return HttpEmbedder(url=url, dim=dim)
    if provider == "file":
        if not path:
            raise ValueError("file embedder requires a path")
        return FileEmbedder(path=path, dim=dim)
    raise ValueError(f"unknown embedding provider: {provider}")
