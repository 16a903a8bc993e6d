"""Query difficulty classification into L1 / L2 / L3."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .errors import AdaVRAGError, EmptyQuery
from .levels import Level
from .prompts import PromptTemplate, load_template

log = logging.getLogger(__name__)

SUMMARY_CUES = ("lesson", "theme", "convey", "overall", "summarize", "message")
CAUSAL_CUES = ("why", "before", "after", "cause", "lead to", "when does")

_LEVEL_TOKEN = re.compile(r"\blevel[\s_-]*([123])\b|\bl([123])\b", re.IGNORECASE)
_ANSWER_LINE = re.compile(r"^\s*(?:final\s+)?(?:answer|level|classification)\s*[:=]\s*(.+)$", re.IGNORECASE | re.MULTILINE)


@dataclass(frozen=True)
class IntentLevel:
    level: Level
    source: str  # "llm" | "heuristic" | "forced"
    raw_output: str = ""


def _cue_pattern(cue: str) -> re.Pattern:
    words = r"\s+".join(re.escape(w) for w in cue.split())
    return re.compile(rf"\b{words}(?:s|es|d|ed)?\b", re.IGNORECASE)


_SUMMARY_RES = tuple(_cue_pattern(c) for c in SUMMARY_CUES)
_CAUSAL_RES = tuple(_cue_pattern(c) for c in CAUSAL_CUES)


def parse_level(text: str) -> Level | None:
    """First level token in ``text``; an explicit ``Answer:`` line wins over prose."""
    for m in _ANSWER_LINE.finditer(text):
        tok = _LEVEL_TOKEN.search(m.group(1))
        if tok:
            return Level("L" + (tok.group(1) or tok.group(2)))
    tok = _LEVEL_TOKEN.search(text)
    if tok:
        return Level("L" + (tok.group(1) or tok.group(2)))
    return None


def classify_heuristic(query: str) -> IntentLevel:
    if not query or not query.strip():
        raise EmptyQuery("query must be non-empty")
    if any(p.search(query) for p in _SUMMARY_RES):
        level = Level.L3
    elif any(p.search(query) for p in _CAUSAL_RES):
        level = Level.L2
    else:
        level = Level.L1
    return IntentLevel(level, "heuristic", "")


def force_level(query: str, level: Level | str | int) -> IntentLevel:
    return IntentLevel(Level.parse(level), "forced", "")


class IntentRouter:
    """Classifies queries through the ``llm`` backend, falling back to the keyword heuristic."""

    def __init__(self, gateway, template: PromptTemplate | None = None, prompt_dir: str | None = None):
        self.gateway = gateway
        self.template = template or load_template("intent_classification", prompt_dir=prompt_dir)

    def classify(self, query: str) -> IntentLevel:
        if not query or not query.strip():
            raise EmptyQuery("query must be non-empty")
        prompt = self.template.render(query=query.strip())
        raw = ""
        for attempt in range(2):
            try:
                raw = self.gateway.complete_text(prompt)
            except AdaVRAGError as exc:
                log.warning("intent backend failed (%s); using heuristic", exc)
                fallback = classify_heuristic(query)
                return IntentLevel(fallback.level, "heuristic", f"backend error: {exc}")
            level = parse_level(raw)
            if level is not None:
                return IntentLevel(level, "llm", raw)
            log.debug("unparseable intent output on attempt %d: %r", attempt + 1, raw)
        fallback = classify_heuristic(query)
        return IntentLevel(fallback.level, "heuristic", raw)


def classify(query: str, gateway, template: PromptTemplate | None = None) -> IntentLevel:
    return IntentRouter(gateway, template).classify(query)
