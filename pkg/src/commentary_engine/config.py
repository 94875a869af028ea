"""Application configuration: provider, retrieval, limits, persistence layout."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .gateway import GatewayConfig


@dataclass
class RetrievalConfig:
    threshold: float = 0.6
    k_max: int = 5


@dataclass
class HttpConfig:
    host: str = "127.0.0.1"
    port: int = 8400


@dataclass
class LimitsConfig:
    m_max: int = 5
    token_budget: int | None = None


@dataclass
class AppConfig:
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    http: HttpConfig = field(default_factory=HttpConfig)
    limits: LimitsConfig = field(default_factory=LimitsConfig)
    ranking_model_path: str | None = None
    templates_path: str | None = None
    data_dir: str = "./data"
    search_provider: str = "mock"  # "mock" | "knowledge"

    def validate(self) -> None:
        if not 0.0 <= self.retrieval.threshold <= 1.0:
            raise ConfigError(f"retrieval.threshold {self.retrieval.threshold} outside [0, 1]")
        if self.retrieval.k_max < 1:
            raise ConfigError("retrieval.k_max must be >= 1")
        if not 0 < self.http.port < 65536:
            raise ConfigError(f"invalid port: {self.http.port}")
        if self.limits.m_max < 1:
            raise ConfigError("limits.m_max must be >= 1")
        if self.search_provider not in ("mock", "knowledge"):
            raise ConfigError(f"unknown search_provider: {self.search_provider}")

    def ensure_data_dir(self) -> Path:
        path = Path(self.data_dir)
        try:
            path.mkdir(parents=True, exist_ok=True)
            probe = path / ".writable"
            probe.write_text("ok")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"data_dir {path} not writable: {exc}") from exc
        return path

    @property
    def knowledge_path(self) -> Path:
        return Path(self.data_dir) / "knowledge.jsonl"

    @property
    def sessions_dir(self) -> Path:
        return Path(self.data_dir) / "sessions"


def load_config(path: str | Path | None = None) -> AppConfig:
    """JSON config file; unspecified fields keep their defaults."""
    config = AppConfig()
    if path is None:
        return config
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc

    for section, target in (
        ("gateway", config.gateway),
        ("retrieval", config.retrieval),
        ("http", config.http),
        ("limits", config.limits),
    ):
        for key, value in obj.get(section, {}).items():
            if not hasattr(target, key):
                raise ConfigError(f"unknown config key {section}.{key}")
            setattr(target, key, value)
    for key in ("ranking_model_path", "templates_path", "data_dir", "search_provider"):
        if key in obj:
            setattr(config, key, obj[key])
    config.validate()
    return config
