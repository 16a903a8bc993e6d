"""Engine configuration: backends, retrieval knobs and default constants."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping
from urllib.parse import urlparse

from .errors import PreconditionError

ROLES = ("captioner", "asr", "ocr", "text_embedder", "frame_embedder", "llm", "generator")

DEFAULT_CLIP_LEN_S = 30.0
DEFAULT_FRAMES_PER_CLIP = 5
DEFAULT_TOKEN_BUDGET = 8192
DEFAULT_MOCK_DIM = 8

ENV_ENDPOINT = "ADAVRAG_BACKEND_{role}_ENDPOINT"


def _valid_url(value: str) -> bool:
    parsed = urlparse(value)
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


@dataclass(frozen=True)
class BackendConfig:
    role: str
    endpoint: str = "mock"
    model_name: str = "mock"
    timeout_ms: int = 30_000
    max_retries: int = 2
    dim: int | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise PreconditionError(f"unknown backend role {self.role!r}")
        if self.endpoint != "mock" and not _valid_url(self.endpoint):
            raise PreconditionError(f"endpoint must be 'mock' or a URL, got {self.endpoint!r}")
        if self.timeout_ms <= 0:
            raise PreconditionError("timeout_ms must be positive")
        if self.max_retries < 0:
            raise PreconditionError("max_retries must be non-negative")
        if self.dim is not None and self.dim <= 0:
            raise PreconditionError("dim must be positive")

    @property
    def is_mock(self) -> bool:
        return self.endpoint == "mock"


@dataclass(frozen=True)
class RetrievalConfig:
    sim_threshold: float = 0.5
    top_k_visual: int = 5
    top_k_text: int = 3
    graph_hops: int = 1
    top_n_graph_seeds: int = 5

    def __post_init__(self) -> None:
        if not -1.0 <= self.sim_threshold <= 1.0:
            raise PreconditionError("sim_threshold must lie in [-1, 1]")
        for name in ("top_k_visual", "top_k_text", "top_n_graph_seeds"):
            if getattr(self, name) < 1:
                raise PreconditionError(f"{name} must be >= 1")
        if self.graph_hops < 0:
            raise PreconditionError("graph_hops must be >= 0")


@dataclass
class EngineConfig:
    backends: list[BackendConfig] = field(default_factory=lambda: [BackendConfig(role=r) for r in ROLES])
    clip_len_s: float = DEFAULT_CLIP_LEN_S
    frames_per_clip: int = DEFAULT_FRAMES_PER_CLIP
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    index_root: str = "index"
    prompt_dir: str | None = None
    token_budget: int = DEFAULT_TOKEN_BUDGET
    embed_dim: int = DEFAULT_MOCK_DIM
    extractor_command: str | None = None

    def __post_init__(self) -> None:
        if self.clip_len_s <= 0:
            raise PreconditionError("clip_len_s must be positive")
        if self.frames_per_clip < 1:
            raise PreconditionError("frames_per_clip must be >= 1")
        if self.token_budget < 1:
            raise PreconditionError("token_budget must be >= 1")
        roles = [b.role for b in self.backends]
        for role in ROLES:
            n = roles.count(role)
            if n != 1:
                raise PreconditionError(f"role {role!r} must resolve to exactly one backend, found {n}")

    def backend(self, role: str) -> BackendConfig:
        for b in self.backends:
            if b.role == role:
                return b
        raise PreconditionError(f"no backend for role {role!r}")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EngineConfig":
        data = dict(data)
        if "backends" in data:
            given = {b["role"]: BackendConfig(**b) for b in data["backends"]}
            data["backends"] = [given.get(r, BackendConfig(role=r)) for r in ROLES] + [
                b for r, b in given.items() if r not in ROLES
            ]
        if "retrieval" in data:
            data["retrieval"] = RetrievalConfig(**data["retrieval"])
        return cls(**data)

    def with_mock_backends(self) -> "EngineConfig":
        dims = {b.role: b.dim for b in self.backends}
        backends = [BackendConfig(role=r, dim=dims.get(r)) for r in ROLES]
        return dataclasses.replace(self, backends=backends)

    def with_retrieval(self, **overrides: Any) -> "EngineConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, retrieval=dataclasses.replace(self.retrieval, **clean))


def apply_env_overrides(cfg: EngineConfig, environ: Mapping[str, str] | None = None) -> EngineConfig:
    """Replace backend endpoints with ``ADAVRAG_BACKEND_<ROLE>_ENDPOINT`` values."""
    env = os.environ if environ is None else environ
    backends = []
    for b in cfg.backends:
        override = env.get(ENV_ENDPOINT.format(role=b.role.upper()))
        backends.append(dataclasses.replace(b, endpoint=override) if override else b)
    return dataclasses.replace(cfg, backends=backends)


def load_config(path: str | os.PathLike | None = None, environ: Mapping[str, str] | None = None) -> EngineConfig:
    """Read a JSON config document (or defaults when ``path`` is None), then apply env overrides."""
    if path is None:
        cfg = EngineConfig()
    else:
        p = Path(path)
        try:
            data = json.loads(p.read_text())
        except FileNotFoundError as exc:
            raise PreconditionError(f"config file not found: {p}") from exc
        except json.JSONDecodeError as exc:
            raise PreconditionError(f"config file {p} is not valid JSON: {exc}") from exc
        cfg = EngineConfig.from_dict(data)
    return apply_env_overrides(cfg, environ)
