"""Role-keyed access to every external model.

The :class:`Gateway` validates inputs and outputs around a backend per role.
Backends are either :class:`MockBackend` (offline, deterministic) or
:class:`RemoteBackend` (HTTP JSON).
"""

from __future__ import annotations

from typing import Any, Mapping

import numpy as np

from ..config import DEFAULT_TOKEN_BUDGET, ROLES, BackendConfig, EngineConfig
from ..errors import (
    BackendMalformed,
    ContextTooLarge,
    DimensionMismatch,
    EmptyFrameSet,
    EmptyText,
    PreconditionError,
)
from ..media import AudioRef, FrameSet
from ..text import word_count
from .mock import MockBackend
from .remote import RemoteBackend

__all__ = ["Gateway", "MockBackend", "RemoteBackend", "as_embedding", "make_backend"]


def as_embedding(values: Any, dim: int | None = None) -> np.ndarray:
    """Validate and convert to a finite 1-D float64 vector of length ``dim``."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise BackendMalformed(f"embedding must be a non-empty 1-D array, got shape {vec.shape}")
    if dim is not None and vec.size != dim:
        raise DimensionMismatch(dim, vec.size)
    if not np.all(np.isfinite(vec)):
        raise BackendMalformed("embedding contains NaN or Inf")
    return vec


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise BackendMalformed("embedding has zero norm")
    return vec / norm


def make_backend(cfg: BackendConfig, default_dim: int):
    if cfg.is_mock:
        return MockBackend(cfg.role, dim=cfg.dim or default_dim)
    return RemoteBackend(cfg)


class Gateway:
    """Uniform entry point for captioner, ASR, OCR, embedders, LLM and generator.

    Safe to share between threads: backends keep no per-call state.
    """

    def __init__(
        self,
        backends: Mapping[str, Any] | None = None,
        *,
        token_budget: int = DEFAULT_TOKEN_BUDGET,
    ):
        self._backends = dict(backends) if backends else {r: MockBackend(r) for r in ROLES}
        self.token_budget = token_budget

    @classmethod
    def from_config(cls, cfg: EngineConfig) -> "Gateway":
        backends = {b.role: make_backend(b, cfg.embed_dim) for b in cfg.backends}
        return cls(backends, token_budget=cfg.token_budget)

    @classmethod
    def mock(cls, dim: int = 8, token_budget: int = DEFAULT_TOKEN_BUDGET, **overrides: Any) -> "Gateway":
        backends = {r: MockBackend(r, dim=dim) for r in ROLES}
        backends.update(overrides)
        return cls(backends, token_budget=token_budget)

    def backend(self, role: str):
        try:
            return self._backends[role]
        except KeyError:
            raise PreconditionError(f"no backend configured for role {role!r}") from None

    def replace(self, **backends: Any) -> "Gateway":
        merged = dict(self._backends)
        merged.update(backends)
        return Gateway(merged, token_budget=self.token_budget)

    @property
    def text_dim(self) -> int | None:
        return self.backend("text_embedder").dim

    @property
    def frame_dim(self) -> int | None:
        return self.backend("frame_embedder").dim

    # -- text ---------------------------------------------------------------

    def complete_text(self, prompt: str, role_hint: str = "llm") -> str:
        if not prompt or not prompt.strip():
            raise PreconditionError("prompt must be non-empty")
        if role_hint not in ("llm", "generator"):
            raise PreconditionError(f"complete_text role must be llm or generator, not {role_hint!r}")
        out = self.backend(role_hint).invoke(prompt, {})
        if not isinstance(out, str):
            raise BackendMalformed(f"{role_hint} backend returned {type(out).__name__}, expected text")
        return out

    def embed_text(self, text: str) -> np.ndarray:
        """Unit-norm embedding of ``text``; identical text gives an identical vector."""
        if not text or not text.strip():
            raise EmptyText("text is empty after whitespace trim")
        b = self.backend("text_embedder")
        return _unit(as_embedding(b.invoke(text, {}), b.dim))

    def embed_text_visual(self, text: str, frame_count: int) -> np.ndarray:
        """Embed ``text`` with the frame encoder's text tower, tiled to match a frame set.

        The cosine of the tiled vector against a concatenated frame embedding
        equals the mean per-frame cosine.
        """
        if not text or not text.strip():
            raise EmptyText("text is empty after whitespace trim")
        if frame_count < 1:
            raise PreconditionError("frame_count must be >= 1")
        b = self.backend("frame_embedder")
        single = _unit(as_embedding(b.invoke(text, {"mode": "text"}), b.dim))
        return _unit(np.tile(single, frame_count))

    # -- frames -------------------------------------------------------------

    def embed_frames(self, frames: FrameSet) -> np.ndarray:
        """Concatenate per-frame embeddings and L2-normalize the result."""
        if len(frames) == 0:
            raise EmptyFrameSet(f"clip {frames.clip_id} has no frames")
        b = self.backend("frame_embedder")
        raw = b.invoke(frames, {"mode": "frames"})
        if not isinstance(raw, (list, tuple)) or len(raw) != len(frames):
            raise BackendMalformed(f"frame embedder returned {len(raw) if hasattr(raw, '__len__') else '?'} "
                                   f"vectors for {len(frames)} frames")
        per_frame = [as_embedding(v) for v in raw]
        expected = b.dim or per_frame[0].size
        for v in per_frame:
            if v.size != expected:
                raise DimensionMismatch(expected, v.size)
        return _unit(np.concatenate([_unit(v) for v in per_frame]))

    def caption_frames(self, frames: FrameSet) -> str:
        if len(frames) == 0:
            raise EmptyFrameSet(f"clip {frames.clip_id} has no frames")
        return self._text_out("captioner", frames, {"times_s": list(frames.times_s)})

    def ocr_frames(self, frames: FrameSet) -> str:
        if len(frames) == 0:
            raise EmptyFrameSet(f"clip {frames.clip_id} has no frames")
        return self._text_out("ocr", frames, {"times_s": list(frames.times_s)})

    def transcribe_audio(self, segment: AudioRef) -> str:
        return self._text_out("asr", segment, {"clip_id": segment.clip_id})

    # -- generation ---------------------------------------------------------

    def generate_answer(self, context: Any, query: str) -> str:
        """Answer ``query`` from an assembled generation context.

        Raises ContextTooLarge when the rendered context exceeds the word budget.
        """
        if not query or not query.strip():
            raise PreconditionError("query must be non-empty")
        words = word_count(context.render())
        if words > self.token_budget:
            raise ContextTooLarge(words, self.token_budget)
        params = {
            "level": str(context.level),
            "query": query,
            "clip_refs": [[c.video_id, c.clip_id, c.start_s, c.end_s] for c in context.clip_refs],
        }
        return self._text_out("generator", context, params)

    def _text_out(self, role: str, payload: Any, params: dict[str, Any]) -> str:
        out = self.backend(role).invoke(payload, params)
        if out is None:
            return ""
        if not isinstance(out, str):
            raise BackendMalformed(f"{role} backend returned {type(out).__name__}, expected text")
        return out

    def close(self) -> None:
        for b in self._backends.values():
            close = getattr(b, "close", None)
            if close:
                close()

