"""Tokenization helpers shared by the mock backends and the heuristics."""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[a-z0-9]+")

STOPWORDS = frozenset(
    """
    a an the and or but if of to in on at by for with from as is are was were be been being
    do does did doing have has had having it its this that these those there here what which
    who whom whose how why when where than then so such not no nor too very can will would
    should could may might must shall into onto about over under again further once he she
    they them their his her him we us our you your i me my mine s t
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lower-case alphanumeric tokens, split on whitespace and punctuation."""
    return _TOKEN_RE.findall(text.lower())


def content_tokens(text: str) -> set[str]:
    return {t for t in tokenize(text) if t not in STOPWORDS}


def word_count(text: str) -> int:
    return len(text.split())


def normalize_name(name: str) -> str:
    """Case-fold and collapse whitespace; the entity merge key."""
    return " ".join(name.casefold().split())


def format_ts(seconds: float) -> str:
    total = int(seconds)
    return f"{total // 60:02d}:{total % 60:02d}"
