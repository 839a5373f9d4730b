"""Engine configuration: file values, environment overrides, defaults."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from typing import Optional

import yaml

# environment variables override file paths for deployment
ENV_PREFIX = "SQLREWARD_"
_ENV_KEYS = {
    "db_root": "DB_ROOT",
    "pool_path": "POOLS",
    "bank_path": "BANK",
    "embedding_url": "EMBED_URL",
}


@dataclass
class EngineConfig:
    db_root: str = "."
    pool_path: Optional[str] = None
    bank_path: Optional[str] = None

    embedding_provider: str = "stub"  # stub | http | file
    embedding_url: Optional[str] = None
    embedding_file: Optional[str] = None
    embedding_dim: int = 1024

    preset: str = "S3"
    k: int = 20
    scope: str = "CrossDB"
    memory_insert: bool = True

    score_timeout_ms: int = 5_000
    eval_timeout_ms: int = 30_000
    parallelism: int = field(default_factory=lambda: os.cpu_count() or 4)
    per_db_concurrency: Optional[int] = None

    def merged(self, overrides: Optional[dict]) -> "EngineConfig":
        """New config with request-level overrides applied on top."""
        if not overrides:
            return self
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        for key, value in overrides.items():
            name = {"timeout": "score_timeout_ms"}.get(key, key)
            if name in values and value is not None:
                values[name] = value
        return EngineConfig(**values)


def load_config(path: Optional[str] = None, env: Optional[dict] = None) -> EngineConfig:
    """Built-in defaults, then file values, then environment overrides."""
    values: dict = {}
    if path:
        with open(path, encoding="utf-8") as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {path} must hold a mapping")
        known = {f.name for f in fields(EngineConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    environ = env if env is not None else os.environ
    for name, suffix in _ENV_KEYS.items():
        env_value = environ.get(ENV_PREFIX + suffix)
        if env_value:
            values[name] = env_value
    return EngineConfig(**values)
