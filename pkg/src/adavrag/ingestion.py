"""Video to clips, sampled frames and modality-tagged text chunks.

A bundle is either a fixture directory::

    <dir>/manifest.json          {"video_id", "duration_s", "clip_len_s"}
    <dir>/clips/<id>.json        {"caption", "asr", "ocr", "frame_labels": [...]}

or a raw media file that an external extractor command turns into the same
layout, one clip at a time.
"""

from __future__ import annotations

import json
import logging
import math
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

from .errors import (
    AdaVRAGError,
    EmptyCaption,
    ExtractionFailed,
    MalformedBundle,
    PathNotFound,
    PreconditionError,
)
from .gateway import Gateway
from .index.store import TextChunk
from .media import AudioRef, ClipFixture, ClipRecord, FrameSet, MediaBundle

log = logging.getLogger(__name__)

MIN_REMAINDER_S = 1.0
MODALITIES = ("caption", "asr", "ocr")


def segment_video(bundle: MediaBundle, clip_len_s: float) -> list[ClipRecord]:
    """Fixed-interval clips covering ``[0, duration_s)``.

    A trailing remainder shorter than one second is merged into the previous
    clip instead of becoming its own clip.
    """
    if not clip_len_s > 0:
        raise PreconditionError("clip_len_s must be positive")
    duration = float(bundle.duration_s)
    n = max(1, math.ceil(duration / clip_len_s))
    if n > 1 and duration - (n - 1) * clip_len_s < MIN_REMAINDER_S:
        n -= 1
    clips = []
    for i in range(n):
        start = i * clip_len_s
        end = duration if i == n - 1 else (i + 1) * clip_len_s
        clips.append(ClipRecord(bundle.video_id, i, start, end))
    return clips


def sample_frames(clip: ClipRecord, n: int, bundle: MediaBundle | None = None) -> FrameSet:
    """Uniformly sample ``n`` frames at subinterval midpoints of the clip."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    step = (clip.end_s - clip.start_s) / n
    times = tuple(clip.start_s + (i + 0.5) * step for i in range(n))
    fixture = bundle.clips.get(clip.clip_id) if bundle is not None else None
    if fixture is not None and fixture.frame_labels:
        labels = fixture.frame_labels
        frames = tuple(labels[(i * len(labels)) // n] for i in range(n))
    else:
        frames = tuple(f"{clip.video_id}/clip{clip.clip_id}@{t:.3f}s" for t in times)
    return FrameSet(clip.video_id, clip.clip_id, frames, times, fixture)


def chunk_id_for(video_id: str, clip_id: int, modality: str) -> str:
    return f"{video_id}:{clip_id}:{modality}"


def extract_clip_texts(clip: ClipRecord, frames: FrameSet, gateway: Gateway) -> dict[str, TextChunk]:
    """Caption, ASR and OCR chunks for one clip.

    ASR and OCR chunks may be empty (``chunk.empty``) and then carry no
    embedding; an empty caption is an error.
    """
    texts: dict[str, str] = {}
    audio = AudioRef(clip.video_id, clip.clip_id, text=frames.fixture.asr if frames.fixture else None)
    calls = {
        "caption": ("captioner", lambda: gateway.caption_frames(frames)),
        "asr": ("asr", lambda: gateway.transcribe_audio(audio)),
        "ocr": ("ocr", lambda: gateway.ocr_frames(frames)),
    }
    for modality, (role, call) in calls.items():
        try:
            texts[modality] = call().strip()
        except AdaVRAGError as exc:
            raise ExtractionFailed(role, exc) from exc
    if not texts["caption"]:
        raise EmptyCaption(f"captioner returned nothing for clip {clip.clip_id}")

    out = {}
    for modality in MODALITIES:
        text = texts[modality]
        try:
            emb = gateway.embed_text(text) if text else None
        except AdaVRAGError as exc:
            raise ExtractionFailed("text_embedder", exc) from exc
        out[modality] = TextChunk(
            chunk_id=chunk_id_for(clip.video_id, clip.clip_id, modality),
            video_id=clip.video_id,
            clip_id=clip.clip_id,
            modality=modality,
            text=text,
            embedding=emb,
            span=(clip.start_s, clip.end_s),
        )
    return out


def extract_all(
    clips: list[ClipRecord], frame_sets: list[FrameSet], gateway: Gateway, jobs: int = 1
) -> list[dict[str, TextChunk]]:
    """Per-clip extraction, optionally threaded; results come back in clip order."""
    pairs = list(zip(clips, frame_sets))
    if jobs <= 1:
        return [extract_clip_texts(c, f, gateway) for c, f in pairs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda cf: extract_clip_texts(cf[0], cf[1], gateway), pairs))


# ---------------------------------------------------------------------------
# bundles
# ---------------------------------------------------------------------------


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedBundle(f"{path} is not valid JSON: {exc}") from exc


def load_fixture_dir(root: Path) -> MediaBundle:
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MalformedBundle(f"{root} has no manifest.json")
    manifest = _read_json(manifest_path)
    if not isinstance(manifest, dict):
        raise MalformedBundle("manifest.json must be an object")
    try:
        video_id = str(manifest["video_id"])
        duration = float(manifest["duration_s"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedBundle(f"manifest.json missing or invalid field: {exc}") from exc
    clip_len = manifest.get("clip_len_s")
    clips_dir = root / "clips"
    if not clips_dir.is_dir():
        raise MalformedBundle(f"{root} has no clips/ directory")
    clips: dict[int, ClipFixture] = {}
    for p in sorted(clips_dir.glob("*.json")):
        try:
            cid = int(p.stem)
        except ValueError:
            raise MalformedBundle(f"clip file name {p.name} is not an integer id") from None
        data = _read_json(p)
        if not isinstance(data, dict):
            raise MalformedBundle(f"{p} must hold an object")
        clips[cid] = ClipFixture.from_dict(data)
    try:
        bundle = MediaBundle(video_id, duration, root=root,
                             clip_len_s=float(clip_len) if clip_len else None, clips=clips)
    except PreconditionError as exc:
        raise MalformedBundle(str(exc)) from exc
    if bundle.clip_len_s:
        expected = len(segment_video(bundle, bundle.clip_len_s))
        missing = [i for i in range(expected) if i not in clips]
        if missing:
            raise MalformedBundle(f"manifest implies {expected} clips; missing clip entries {missing}")
    return bundle


def run_extractor(
    media: Path,
    command: str,
    duration_s: float,
    clip_len_s: float,
    outdir: Path,
    video_id: str | None = None,
) -> Path:
    """Run ``command`` once per clip and assemble a fixture directory in ``outdir``.

    The command template may use ``{input}``, ``{clip_start}``, ``{clip_end}``
    and ``{outdir}``; each run must write ``{outdir}/clip.json`` in the clip
    fixture format.
    """
    vid = video_id or media.stem
    stub = MediaBundle(vid, duration_s)
    (outdir / "clips").mkdir(parents=True, exist_ok=True)
    for clip in segment_video(stub, clip_len_s):
        clip_out = outdir / "work" / str(clip.clip_id)
        clip_out.mkdir(parents=True, exist_ok=True)
        argv = [
            part.format(input=str(media), clip_start=f"{clip.start_s:g}", clip_end=f"{clip.end_s:g}",
                        outdir=str(clip_out))
            for part in shlex.split(command)
        ]
        proc = subprocess.run(argv, capture_output=True, text=True)
        if proc.returncode != 0:
            raise MalformedBundle(f"extractor failed on clip {clip.clip_id}: {proc.stderr.strip()}")
        produced = clip_out / "clip.json"
        if not produced.is_file():
            raise MalformedBundle(f"extractor wrote no clip.json for clip {clip.clip_id}")
        (outdir / "clips" / f"{clip.clip_id}.json").write_text(produced.read_text())
    manifest = {"video_id": vid, "duration_s": duration_s, "clip_len_s": clip_len_s}
    (outdir / "manifest.json").write_text(json.dumps(manifest))
    return outdir


def build_media_bundle(
    path: str | Path,
    *,
    extractor_command: str | None = None,
    duration_s: float | None = None,
    clip_len_s: float = 30.0,
    workdir: str | Path | None = None,
) -> MediaBundle:
    """Load a fixture directory, or extract a raw media file into one first."""
    p = Path(path)
    if not p.exists():
        raise PathNotFound(f"{p} does not exist")
    if p.is_dir():
        return load_fixture_dir(p)
    if not extractor_command:
        raise MalformedBundle(f"{p} is a media file but no extractor command is configured")
    if duration_s is None:
        sidecar = p.with_suffix(p.suffix + ".json")
        if not sidecar.is_file():
            raise MalformedBundle(f"duration of {p} unknown: pass duration_s or provide {sidecar.name}")
        duration_s = float(_read_json(sidecar)["duration_s"])
    out = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="adavrag-"))
    run_extractor(p, extractor_command, duration_s, clip_len_s, out)
    return load_fixture_dir(out)
