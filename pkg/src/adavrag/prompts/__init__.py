"""Versioned plain-text prompt templates.

Files are named ``<name>.v<version>.txt``. Leading ``#`` lines form a header
and are not part of the body.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from ..errors import PreconditionError

PACKAGE_DIR = Path(__file__).resolve().parent

_PLACEHOLDER_RE = re.compile(r"\{([a-z_0-9]+)\}")
_FILE_RE = re.compile(r"^(?P<name>[a-z_0-9]+)\.v(?P<version>\d+)\.txt$")

REQUIRED_FIELDS = {
    "intent_classification": ("query",),
    "query_rewrite": ("query",),
    "entity_extraction": ("location", "chunk"),
    "evidence_filter": ("query", "clip_texts"),
    "pairwise_judge": ("query", "answer_1", "answer_2"),
}


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    version: int

    def __post_init__(self) -> None:
        found = _PLACEHOLDER_RE.findall(self.body)
        for required in REQUIRED_FIELDS.get(self.name, ()):
            if found.count(required) != 1:
                raise PreconditionError(
                    f"template {self.name} v{self.version} must contain exactly one {{{required}}} placeholder"
                )

    def render(self, **fields: str) -> str:
        # plain replacement so literal braces elsewhere in the body survive
        def sub(match: re.Match) -> str:
            key = match.group(1)
            return str(fields[key]) if key in fields else match.group(0)

        return _PLACEHOLDER_RE.sub(sub, self.body)


def _available(prompt_dir: Path) -> dict[tuple[str, int], Path]:
    out = {}
    if prompt_dir.is_dir():
        for p in prompt_dir.iterdir():
            m = _FILE_RE.match(p.name)
            if m:
                out[(m.group("name"), int(m.group("version")))] = p
    return out


def load_template(name: str, version: int | None = None, prompt_dir: str | Path | None = None) -> PromptTemplate:
    """Load ``name`` (latest version unless given), preferring ``prompt_dir`` over the bundled set."""
    found = _available(PACKAGE_DIR)
    if prompt_dir is not None:
        found.update(_available(Path(prompt_dir)))
    versions = sorted(v for (n, v) in found if n == name)
    if not versions:
        raise PreconditionError(f"no prompt template named {name!r}")
    if version is None:
        version = versions[-1]
    if (name, version) not in found:
        raise PreconditionError(f"prompt template {name!r} has no version {version}")
    lines = found[(name, version)].read_text().splitlines()
    while lines and lines[0].startswith("#"):
        lines.pop(0)
    return PromptTemplate(name=name, body="\n".join(lines).strip() + "\n", version=version)
