"""Media-side value types: bundles, clips, frame sets and audio references."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import PreconditionError


@dataclass(frozen=True)
class ClipFixture:
    """Pre-extracted per-clip content, as stored in ``clips/<id>.json``."""

    caption: str = ""
    asr: str | None = ""
    ocr: str = ""
    frame_labels: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ClipFixture":
        return cls(
            caption=str(data.get("caption", "")),
            asr=data.get("asr", ""),
            ocr=str(data.get("ocr", "")),
            frame_labels=tuple(str(x) for x in data.get("frame_labels", ())),
        )

    def to_dict(self) -> dict[str, Any]:
        return {"caption": self.caption, "asr": self.asr, "ocr": self.ocr, "frame_labels": list(self.frame_labels)}


@dataclass
class MediaBundle:
    video_id: str
    duration_s: float
    root: Path | None = None
    clip_len_s: float | None = None
    clips: dict[int, ClipFixture] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.video_id:
            raise PreconditionError("video_id must be non-empty")
        if not self.duration_s > 0:
            raise PreconditionError("duration_s must be positive")


@dataclass(frozen=True)
class ClipRecord:
    video_id: str
    clip_id: int
    start_s: float
    end_s: float

    @property
    def length_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def key(self) -> tuple[str, int]:
        return (self.video_id, self.clip_id)

    def to_dict(self) -> dict[str, Any]:
        return {"video_id": self.video_id, "clip_id": self.clip_id, "start_s": self.start_s, "end_s": self.end_s}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ClipRecord":
        return cls(d["video_id"], int(d["clip_id"]), float(d["start_s"]), float(d["end_s"]))


@dataclass(frozen=True)
class FrameSet:
    """Sampled frames of one clip.

    ``frames`` holds frame references: image paths for real media, label text
    for fixtures. ``fixture`` carries the clip's pre-extracted content when the
    bundle is a fixture directory; mock backends read from it.
    """

    video_id: str
    clip_id: int
    frames: tuple[str, ...]
    times_s: tuple[float, ...]
    fixture: ClipFixture | None = None

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class AudioRef:
    video_id: str
    clip_id: int
    text: str | None = None
    path: str | None = None
