"""Run configuration.

One YAML file drives every pipeline stage; CLI flags override file values.
Backends are declared per persona role (generator / reviewer / splitter)
with a `default` fallback, so reviewers can run on a cheaper model than the
generator without code changes.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .gateway import BackendConfig, ConfigError

DEFAULT_PANEL = [
    "content_cohesion",
    "information_accuracy",
    "linguistic_quality",
    "required_sentence",
]
BACKEND_ROLES = ("default", "generator", "reviewer", "splitter")


@dataclass
class RunConfig:
    corpus_path: str | None = None
    sections_per_article: int = 4
    seed: int = 0
    output_dir: str = "runs/default"
    run_id: str | None = None
    max_iterations: int = 5
    parallelism: int = 4
    panel: list[str] = field(default_factory=lambda: list(DEFAULT_PANEL))
    backends: dict[str, BackendConfig] = field(default_factory=dict)
    service_port: int = 8571
    service_host: str = "127.0.0.1"
    static_dir: str | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.sections_per_article < 0:
            raise ConfigError("sections_per_article must be >= 0")
        if not self.panel:
            raise ConfigError("panel must name at least one reviewer persona")

    @property
    def effective_run_id(self) -> str:
        return self.run_id or f"run{self.seed:08x}"

    def backend_for(self, role: str) -> BackendConfig:
        if role in self.backends:
            return self.backends[role]
        if "default" in self.backends:
            return self.backends["default"]
        raise ConfigError(f"no backend configured for role {role!r} and no default")

    def use_mock_script(self, script_path: str) -> None:
        """Point every role at one mock script (the --mock-script override)."""
        self.backends = {"default": BackendConfig(kind="mock", script_path=script_path)}


def _parse_backend(raw: dict) -> BackendConfig:
    known = {
        "kind",
        "endpoint_url",
        "credential_source",
        "script_path",
        "retry_limit",
        "requests_per_minute",
        "backoff_base",
        "backoff_factor",
        "backoff_jitter",
        "timeout",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown backend keys: {sorted(unknown)}")
    return BackendConfig(**raw)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping: {path}")
    backends_raw = raw.pop("backends", {})
    if not isinstance(backends_raw, dict):
        raise ConfigError("backends must be a mapping of role -> backend settings")
    backends = {}
    for role, settings in backends_raw.items():
        if role not in BACKEND_ROLES:
            raise ConfigError(f"unknown backend role {role!r}; expected one of {BACKEND_ROLES}")
        backends[role] = _parse_backend(dict(settings))
    known_keys = {
        "corpus_path",
        "sections_per_article",
        "seed",
        "output_dir",
        "run_id",
        "max_iterations",
        "parallelism",
        "panel",
        "service_port",
        "service_host",
        "static_dir",
    }
    unknown = set(raw) - known_keys
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(backends=backends, **raw)


def derive_section_seed(seed: int, article_id: str) -> int:
    """Stable per-article sampling seed; crc32 keeps it platform-independent."""
    return (seed & 0xFFFFFFFF) ^ zlib.crc32(article_id.encode("utf-8"))
