"""Deterministic offline backends.

Every mock is a pure function of its inputs and the clip fixtures. The LLM
mock dispatches on a marker line at the top of the prompt (``[INTENT]``,
``[REWRITE]``, ``[EXTRACT]``, ``[FILTER]``, ``[JUDGE]``) and answers from the
rule tables below.
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache
from typing import Any

import numpy as np

from ..errors import BackendMalformed, MissingAudio
from ..media import AudioRef, FrameSet
from ..text import STOPWORDS, content_tokens, tokenize

# ---------------------------------------------------------------------------
# bag-of-hashed-tokens embedder
# ---------------------------------------------------------------------------


@lru_cache(maxsize=65536)
def token_vector(token: str, dim: int) -> np.ndarray:
    """Pseudo-random unit vector for ``token``; stable across processes."""
    digest = hashlib.blake2b(f"{dim}:{token}".encode(), digest_size=8, person=b"adavrag-tok").digest()
    v = np.random.default_rng(int.from_bytes(digest, "little")).standard_normal(dim)
    v /= np.linalg.norm(v)
    v.setflags(write=False)
    return v


def bag_of_words(text: str, dim: int) -> np.ndarray:
    toks = tokenize(text) or [text.strip()]
    acc = np.zeros(dim, dtype=np.float64)
    for t in toks:
        acc += token_vector(t, dim)
    norm = np.linalg.norm(acc)
    if norm == 0.0:
        # only possible when tokens cancel exactly; fall back to the whole text
        acc = token_vector(" ".join(toks), dim).copy()
        norm = 1.0
    return acc / norm


# ---------------------------------------------------------------------------
# LLM rule tables
# ---------------------------------------------------------------------------

INTENT_RULES: tuple[tuple[str, tuple[str, ...]], ...] = (
    (
        "Level-3",
        (
            r"\blife lessons?\b",
            r"\bconvey",
            r"\bhow would\b",
            r"\bif\b.*\b(were|was) (removed|deleted)\b",
            r"\bthemes?\b",
            r"\bsummari[sz]e\b",
            r"\boverall\b",
            r"\bmessage\b",
            r"\bthroughout\b",
        ),
    ),
    (
        "Level-2",
        (
            r"\bwhy\b",
            r"\bbefore\b",
            r"\bafter\b",
            r"\bwhen does\b",
            r"\bcaus",
            r"\bhow did\b",
            r"\blead to\b",
        ),
    ),
)

REWRITE_TABLE: dict[str, tuple[str, str, str]] = {
    "how did the number 30 player perform?": (
        "The performance of Number 30 player.",
        "How's the number 30 player doing.",
        "Number 30 player",
    ),
}

_WH_PREFIX = re.compile(
    r"^\s*(what|which|who|whom|whose|why|when|where|how)\b(\s+(is|are|was|were|do|does|did|can|could|would|will|has|have|had))?\s*",
    re.IGNORECASE,
)

# verb -> (relation description, tail entity name, tail entity type, relation kind)
VERB_TABLE: dict[str, tuple[str, str, str, str]] = {
    "scores": ("scores_in", "game", "event", "functional"),
    "passes": ("passes_in", "game", "event", "functional"),
    "cries": ("cries_during", "scene", "event", "causal"),
}

_PLAYER_RE = re.compile(r"\bnumber\s+(\d+)\s+player\b", re.IGNORECASE)
MAX_GENERIC_ENTITIES = 4


def _field(prompt: str, label: str) -> str:
    m = re.search(rf"^{re.escape(label)}:[ \t]*(.*)$", prompt, re.MULTILINE)
    return m.group(1).strip() if m else ""


def _block(prompt: str, start: str, end: str | None) -> str:
    i = prompt.find(start)
    if i < 0:
        return ""
    i += len(start)
    j = prompt.find(end, i) if end else -1
    return prompt[i:j if j >= 0 else None].strip()


def mock_intent(query: str) -> str:
    q = query.lower()
    for level, patterns in INTENT_RULES:
        if any(re.search(p, q) for p in patterns):
            return level
    return "Level-1"


def mock_rewrite(query: str) -> str:
    key = " ".join(query.lower().split())
    if key in REWRITE_TABLE:
        caption, asr, ocr = REWRITE_TABLE[key]
    else:
        core = _WH_PREFIX.sub("", query.strip()).rstrip("?!. ")
        caption = (core[:1].upper() + core[1:] + ".") if core else query
        asr = query.strip().rstrip("?!. ").lower() + "."
        words = [w for w in re.findall(r"[A-Za-z0-9]+", query) if w.lower() not in STOPWORDS]
        ocr = " ".join(words) or query
    return f"CAPTION: {caption}\nASR: {asr}\nOCR: {ocr}"


def mock_extract(chunk: str, location: str) -> str:
    lines: list[str] = []
    consumed: set[str] = set()
    persons: list[str] = []
    for m in _PLAYER_RE.finditer(chunk):
        name = f"Number {m.group(1)} player"
        if name not in persons:
            persons.append(name)
            lines.append(f"ENTITY\tperson\t{name}\t{location}\tplayer wearing number {m.group(1)}")
        consumed.update(tokenize(m.group(0)))
    toks = tokenize(chunk)
    for verb, (desc, tail, tail_type, kind) in VERB_TABLE.items():
        if verb in toks and persons:
            lines.append(f"ENTITY\t{tail_type}\t{tail}\t{location}\t{tail} in {location}")
            for p in persons:
                lines.append(f"REL\t{p}\t{tail}\t{kind}\t{desc}")
            consumed.update((verb, tail))
    generic: list[str] = []
    for t in toks:
        if t in consumed or t in STOPWORDS or len(t) < 3 or t.isdigit() or t in generic:
            continue
        generic.append(t)
        if len(generic) == MAX_GENERIC_ENTITIES:
            break
    for t in generic:
        lines.append(f"ENTITY\tconcept\t{t}\t{location}\t{t} mentioned at {location}")
    named = persons + generic
    for a, b in zip(named, named[1:]):
        lines.append(f"REL\t{a}\t{b}\tspatio-temporal\tco-occur at {location}")
    return "\n".join(lines)


def mock_filter(prompt: str) -> str:
    query = _field(prompt, "QUERY")
    texts = _block(prompt, "CLIP TEXTS:", None)
    return "KEEP" if content_tokens(query) & content_tokens(texts) else "DROP"


JUDGE_DIMENSIONS = ("Comprehensiveness", "Empowerment", "Trustworthiness", "Depth", "Density", "Overall Winner")


def mock_judge(prompt: str) -> str:
    a1 = _block(prompt, "ANSWER 1:", "END ANSWER 1")
    a2 = _block(prompt, "ANSWER 2:", "END ANSWER 2")
    if len(a1) > len(a2):
        verdict = "Answer 1"
    elif len(a2) > len(a1):
        verdict = "Answer 2"
    else:
        verdict = "Tie"
    return "\n".join(f"{d}: {verdict}" for d in JUDGE_DIMENSIONS)


def mock_complete(prompt: str) -> str:
    head = prompt.lstrip()
    if head.startswith("[INTENT]"):
        return mock_intent(_field(prompt, "Query"))
    if head.startswith("[REWRITE]"):
        return mock_rewrite(_field(prompt, "Query"))
    if head.startswith("[EXTRACT]"):
        return mock_extract(_field(prompt, "Chunk"), _field(prompt, "Location"))
    if head.startswith("[FILTER]"):
        return mock_filter(prompt)
    if head.startswith("[JUDGE]"):
        return mock_judge(prompt)
    return ""


# ---------------------------------------------------------------------------
# backend
# ---------------------------------------------------------------------------


class MockBackend:
    """Serves every role offline; ``dim`` is the text / per-frame embedding size."""

    is_mock = True

    def __init__(self, role: str, dim: int = 8):
        self.role = role
        self.dim = dim

    def invoke(self, payload: Any, params: dict[str, Any]) -> Any:
        role = self.role
        if role == "llm":
            return mock_complete(payload)
        if role == "text_embedder":
            return bag_of_words(payload, self.dim)
        if role == "frame_embedder":
            if params.get("mode") == "text":
                return bag_of_words(payload, self.dim)
            return [bag_of_words(label, self.dim) for label in payload.frames]
        if role == "captioner":
            return _fixture(payload).caption
        if role == "ocr":
            return _fixture(payload).ocr
        if role == "asr":
            return _transcript(payload)
        if role == "generator":
            ids = ",".join(str(c.clip_id) for c in payload.clip_refs)
            return f"{payload.level}|clips={ids}"
        raise BackendMalformed(f"mock has no behaviour for role {role!r}")


def _fixture(frames: FrameSet):
    if frames.fixture is None:
        raise BackendMalformed(f"mock needs fixture data for clip {frames.clip_id}")
    return frames.fixture


def _transcript(ref: AudioRef) -> str:
    if ref.text is not None:
        return ref.text
    if ref.path is not None:
        try:
            with open(ref.path, encoding="utf-8") as fh:
                return fh.read().strip()
        except OSError as exc:
            raise MissingAudio(f"audio for clip {ref.clip_id} not readable: {exc}") from exc
    raise MissingAudio(f"audio reference for clip {ref.clip_id} resolves to nothing")
