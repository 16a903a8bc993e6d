"""HTTP client for remote model backends.

Wire contract: ``POST <endpoint>`` with JSON ``{"role", "model", "input", "params"}``,
answered by JSON ``{"output": string | [numbers] | [[numbers]]}``.
"""

from __future__ import annotations

import logging
from typing import Any

import httpx

from ..config import BackendConfig
from ..errors import BackendMalformed, BackendUnreachable, MissingAudio
from ..media import AudioRef, FrameSet

log = logging.getLogger(__name__)


def wire_input(role: str, payload: Any) -> Any:
    if isinstance(payload, FrameSet):
        return list(payload.frames)
    if isinstance(payload, AudioRef):
        if payload.path is not None:
            return payload.path
        if payload.text is not None:
            return payload.text
        raise MissingAudio(f"audio reference for clip {payload.clip_id} resolves to nothing")
    if hasattr(payload, "render"):
        return payload.render()
    return payload


class RemoteBackend:
    is_mock = False

    def __init__(self, config: BackendConfig, client: httpx.Client | None = None):
        self.config = config
        self.role = config.role
        self.dim = config.dim
        self.attempts = 0
        # httpx.Client pools connections and is safe to share between threads
        self._client = client or httpx.Client(timeout=config.timeout_ms / 1000.0)

    def invoke(self, payload: Any, params: dict[str, Any]) -> Any:
        body = {
            "role": self.role,
            "model": self.config.model_name,
            "input": wire_input(self.role, payload),
            "params": params,
        }
        total = 1 + self.config.max_retries
        reason = ""
        for attempt in range(1, total + 1):
            self.attempts += 1
            try:
                resp = self._client.post(self.config.endpoint, json=body)
            except httpx.TransportError as exc:
                reason = f"{type(exc).__name__}: {exc}"
                log.debug("attempt %d/%d to %s failed: %s", attempt, total, self.config.endpoint, reason)
                continue
            if resp.status_code >= 500:
                reason = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendMalformed(f"{self.role} backend rejected request: HTTP {resp.status_code}")
            return _parse_output(resp)
        raise BackendUnreachable(self.role, self.config.endpoint, total, reason)

    def close(self) -> None:
        self._client.close()


def _parse_output(resp: httpx.Response) -> Any:
    try:
        data = resp.json()
    except ValueError as exc:
        raise BackendMalformed(f"response is not JSON: {exc}") from exc
    if not isinstance(data, dict) or "output" not in data:
        raise BackendMalformed("response JSON lacks an 'output' field")
    out = data["output"]
    if isinstance(out, str):
        return out
    if isinstance(out, list) and all(_is_number(x) for x in out):
        return out
    if isinstance(out, list) and all(isinstance(row, list) and all(_is_number(x) for x in row) for row in out):
        return out
    raise BackendMalformed("'output' must be a string, a number array, or an array of number arrays")


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)
