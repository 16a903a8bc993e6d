from __future__ import annotations

import re
from enum import Enum

from .errors import PreconditionError


class Level(str, Enum):
    """Query difficulty tier: no retrieval, naive retrieval, graph retrieval."""

    L1 = "L1"
    L2 = "L2"
    L3 = "L3"

    def __str__(self) -> str:
        return self.value

    @property
    def number(self) -> int:
        return int(self.value[1])

    @classmethod
    def parse(cls, value: "str | int | Level") -> "Level":
        if isinstance(value, Level):
            return value
        text = re.sub(r"[\s_-]", "", str(value).upper()).replace("LEVEL", "L")
        if text in ("1", "2", "3"):
            text = "L" + text
        try:
            return cls(text)
        except ValueError:
            raise PreconditionError(f"invalid level {value!r}; expected 1, 2 or 3") from None
