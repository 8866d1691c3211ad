"""Application configuration: file, environment, and CLI layers.

Precedence per key is CLI flag over environment variable over config file
over built-in default. Config files are TOML with top-level service keys
and a ``[pipeline]`` table for loop tunables. Secrets never live in config
files: the remote API key is read only from the environment.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

from .embedding import CachingEmbedder, Embedder, HashEmbedder, RemoteEmbedder
from .errors import WtsError
from .kg_store import DkgStore
from .llm_gateway import (
    ENV_API_KEY,
    ENV_BASE_URL,
    ENV_MODEL,
    GenParams,
    LlmClient,
    MockLlm,
    RemoteLlm,
)
from .pipeline import Mode, PipelineConfig, RetrievalStrategy

ENV_EMBED_MODEL = "WTS_EMBED_MODEL"


class ConfigError(WtsError, ValueError):
    """A configuration value is missing or unusable."""


DEFAULTS: dict[str, Any] = {
    "store_path": "kg_store.jsonl",
    "audit_log_path": "kg_audit.jsonl",
    "embedder": "hash",
    "llm": "mock",
    "mock_script": None,
    "domain": "general",
    "host": "127.0.0.1",
    "port": 8000,
    "hash_seed": 42,
    "static_dir": None,
    "pipeline.max_entities": 5,
    "pipeline.max_depth": 3,
    "pipeline.prune_width": 5,
    "pipeline.max_hop": 1,
    "pipeline.similarity_gap": 0.55,
    "pipeline.redundancy_gap": 0.1,
    "pipeline.strategy": "em-qsr",
    "pipeline.temperature": 0.2,
    "pipeline.max_tokens": 2048,
    "pipeline.retries": 3,
    "pipeline.mode": "apprenticeship",
}

ENV_VARS: dict[str, str] = {
    "store_path": "WTS_STORE_PATH",
    "audit_log_path": "WTS_AUDIT_LOG_PATH",
    "embedder": "WTS_EMBEDDER",
    "llm": "WTS_LLM",
    "mock_script": "WTS_MOCK_SCRIPT",
    "domain": "WTS_DOMAIN",
    "host": "WTS_HOST",
    "port": "WTS_PORT",
    "hash_seed": "WTS_HASH_SEED",
    "static_dir": "WTS_STATIC_DIR",
    "pipeline.max_entities": "WTS_MAX_ENTITIES",
    "pipeline.max_depth": "WTS_MAX_DEPTH",
    "pipeline.prune_width": "WTS_PRUNE_WIDTH",
    "pipeline.max_hop": "WTS_MAX_HOP",
    "pipeline.similarity_gap": "WTS_SIMILARITY_GAP",
    "pipeline.redundancy_gap": "WTS_REDUNDANCY_GAP",
    "pipeline.strategy": "WTS_STRATEGY",
    "pipeline.temperature": "WTS_TEMPERATURE",
    "pipeline.max_tokens": "WTS_MAX_TOKENS",
    "pipeline.retries": "WTS_RETRIES",
    "pipeline.mode": "WTS_MODE",
}

_INT_KEYS = {
    "port",
    "hash_seed",
    "pipeline.max_entities",
    "pipeline.max_depth",
    "pipeline.prune_width",
    "pipeline.max_hop",
    "pipeline.max_tokens",
    "pipeline.retries",
}
_FLOAT_KEYS = {"pipeline.similarity_gap", "pipeline.redundancy_gap", "pipeline.temperature"}


@dataclass(frozen=True)
class AppConfig:
    store_path: Path
    audit_log_path: Path | None
    embedder: str
    llm: str
    mock_script: Path | None
    domain: str
    host: str
    port: int
    hash_seed: int
    static_dir: Path | None
    pipeline: PipelineConfig
    explicit: frozenset[str]

    def pipeline_for_depth(self, max_depth: int) -> PipelineConfig:
        from dataclasses import replace

        return replace(self.pipeline, max_depth=max_depth)

    def depth_was_set(self) -> bool:
        return "pipeline.max_depth" in self.explicit


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    return value


def _read_file(path: str | Path) -> dict[str, Any]:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    flat: dict[str, Any] = {}
    for key, value in data.items():
        if key == "pipeline" and isinstance(value, dict):
            for sub, sub_value in value.items():
                flat[f"pipeline.{sub}"] = sub_value
        else:
            flat[key] = value
    unknown = set(flat) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return flat


def load_config(
    config_path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
) -> AppConfig:
    """Assemble the effective configuration from all layers.

    ``overrides`` holds CLI-level values keyed like DEFAULTS; None values
    are ignored so unset flags never shadow lower layers.
    """
    values = dict(DEFAULTS)
    explicit: set[str] = set()

    if config_path is not None:
        for key, value in _read_file(config_path).items():
            values[key] = _coerce(key, value)
            explicit.add(key)
    for key, var in ENV_VARS.items():
        raw = os.environ.get(var)
        if raw is not None and raw != "":
            values[key] = _coerce(key, raw)
            explicit.add(key)
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown override key {key!r}")
        if value is not None:
            values[key] = _coerce(key, value)
            explicit.add(key)

    if values["embedder"] not in ("hash", "remote"):
        raise ConfigError(f"embedder must be 'hash' or 'remote', got {values['embedder']!r}")
    if values["llm"] not in ("mock", "remote"):
        raise ConfigError(f"llm must be 'mock' or 'remote', got {values['llm']!r}")

    try:
        pipeline = PipelineConfig(
            max_entities=values["pipeline.max_entities"],
            max_depth=values["pipeline.max_depth"],
            prune_width=values["pipeline.prune_width"],
            max_hop=values["pipeline.max_hop"],
            similarity_gap=values["pipeline.similarity_gap"],
            redundancy_gap=values["pipeline.redundancy_gap"],
            strategy=RetrievalStrategy(values["pipeline.strategy"]),
            gen=GenParams(
                temperature=values["pipeline.temperature"],
                max_tokens=values["pipeline.max_tokens"],
                retries=values["pipeline.retries"],
            ),
            mode=Mode(values["pipeline.mode"]),
            domain=values["domain"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return AppConfig(
        store_path=Path(values["store_path"]),
        audit_log_path=Path(values["audit_log_path"]) if values["audit_log_path"] else None,
        embedder=values["embedder"],
        llm=values["llm"],
        mock_script=Path(values["mock_script"]) if values["mock_script"] else None,
        domain=values["domain"],
        host=values["host"],
        port=values["port"],
        hash_seed=values["hash_seed"],
        static_dir=Path(values["static_dir"]) if values["static_dir"] else None,
        pipeline=pipeline,
        explicit=frozenset(explicit),
    )


def build_embedder(cfg: AppConfig) -> Embedder:
    if cfg.embedder == "hash":
        return CachingEmbedder(HashEmbedder(seed=cfg.hash_seed))
    base_url = os.environ.get(ENV_BASE_URL, "").strip()
    model = os.environ.get(ENV_EMBED_MODEL, "").strip()
    if not base_url or not model:
        raise ConfigError(
            f"remote embedder requires {ENV_BASE_URL} and {ENV_EMBED_MODEL} to be set"
        )
    return CachingEmbedder(
        RemoteEmbedder(base_url, model, api_key=os.environ.get(ENV_API_KEY, ""))
    )


def build_llm(cfg: AppConfig) -> LlmClient:
    if cfg.llm == "mock":
        if cfg.mock_script is None:
            raise ConfigError("llm = 'mock' requires a mock_script path")
        return MockLlm.from_jsonl(cfg.mock_script)
    try:
        return RemoteLlm.from_env()
    except WtsError as exc:
        raise ConfigError(str(exc)) from exc


def open_store(cfg: AppConfig) -> DkgStore:
    if Path(cfg.store_path).exists():
        return DkgStore.load(cfg.store_path)
    return DkgStore()


def redacted(cfg: AppConfig) -> dict:
    """Config view for the HTTP API, with secret material masked."""
    return {
        "store_path": str(cfg.store_path),
        "audit_log_path": str(cfg.audit_log_path) if cfg.audit_log_path else None,
        "embedder": cfg.embedder,
        "llm": cfg.llm,
        "mock_script": str(cfg.mock_script) if cfg.mock_script else None,
        "domain": cfg.domain,
        "host": cfg.host,
        "port": cfg.port,
        "hash_seed": cfg.hash_seed,
        "static_dir": str(cfg.static_dir) if cfg.static_dir else None,
        "llm_base_url": os.environ.get(ENV_BASE_URL, ""),
        "llm_model": os.environ.get(ENV_MODEL, ""),
        "embed_model": os.environ.get(ENV_EMBED_MODEL, ""),
        "llm_api_key": "***" if os.environ.get(ENV_API_KEY) else "",
        "pipeline": {
            "max_entities": cfg.pipeline.max_entities,
            "max_depth": cfg.pipeline.max_depth,
            "prune_width": cfg.pipeline.prune_width,
            "max_hop": cfg.pipeline.max_hop,
            "similarity_gap": cfg.pipeline.similarity_gap,
            "redundancy_gap": cfg.pipeline.redundancy_gap,
            "strategy": cfg.pipeline.strategy.value,
            "temperature": cfg.pipeline.gen.temperature,
            "max_tokens": cfg.pipeline.gen.max_tokens,
            "retries": cfg.pipeline.gen.retries,
            "mode": cfg.pipeline.mode.value,
        },
    }
