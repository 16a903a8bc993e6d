"""Exception hierarchy shared by every engine module."""

from __future__ import annotations


class AdaVRAGError(Exception):
    """Base class for all engine errors."""


class PreconditionError(AdaVRAGError, ValueError):
    """An operation was called with inputs violating its contract."""


# gateway
class GatewayError(AdaVRAGError):
    pass


class BackendUnreachable(GatewayError):
    def __init__(self, role: str, endpoint: str, attempts: int, reason: str = ""):
        self.role = role
        self.endpoint = endpoint
        self.attempts = attempts
        super().__init__(f"{role} backend at {endpoint} unreachable after {attempts} attempt(s): {reason}")


class BackendMalformed(GatewayError):
    pass


class ContextTooLarge(GatewayError):
    def __init__(self, words: int, budget: int):
        self.words = words
        self.budget = budget
        super().__init__(f"context has {words} words, budget is {budget}")


class EmptyText(GatewayError, PreconditionError):
    pass


class EmptyFrameSet(GatewayError, PreconditionError):
    pass


class MissingAudio(GatewayError):
    pass


class DimensionMismatch(AdaVRAGError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected dim {expected}, got {got}")


# ingestion
class PathNotFound(AdaVRAGError, FileNotFoundError):
    pass


class MalformedBundle(AdaVRAGError):
    pass


class ExtractionFailed(AdaVRAGError):
    def __init__(self, role: str, cause: Exception | None = None):
        self.role = role
        super().__init__(f"extraction failed for role {role}: {cause}")


class EmptyCaption(AdaVRAGError):
    pass


# index store
class DuplicateChunkId(AdaVRAGError):
    pass


class IndexFrozen(AdaVRAGError):
    pass


class UnknownSeed(AdaVRAGError, KeyError):
    pass


class VersionMismatch(AdaVRAGError):
    pass


class CorruptIndex(AdaVRAGError):
    pass


class ExtractionParseError(AdaVRAGError):
    pass


class EmptyGraph(AdaVRAGError):
    pass


# router / generation / evaluation
class EmptyQuery(PreconditionError):
    pass


class LevelMismatch(AdaVRAGError):
    pass


class EmptyVerdicts(AdaVRAGError):
    pass


class UnknownItem(AdaVRAGError, KeyError):
    pass


class NotMCQ(AdaVRAGError):
    pass


class ManifestError(AdaVRAGError):
    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")
