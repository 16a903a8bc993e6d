from __future__ import annotations

import json
from pathlib import Path

import pytest

from adavrag.config import EngineConfig
from adavrag.engine import build_index
from adavrag.gateway import Gateway
from adavrag.ingestion import load_fixture_dir

REPO = Path(__file__).resolve().parents[1]
SAMPLE_BUNDLE = REPO / "sample_data" / "game"

SIX_CLIPS = [
    {"caption": "players warm up on the court", "asr": "welcome to the game", "ocr": "HOME 0 AWAY 0",
     "frame_labels": ["court", "players stretching", "ball", "crowd", "referee"]},
    {"caption": "the Number 30 player dribbles past a defender", "asr": "how's the number 30 player doing",
     "ocr": "Number 30", "frame_labels": ["player dribbles", "defender", "jersey 30", "court", "crowd"]},
    {"caption": "the Number 30 player scores a basket", "asr": "what a shot", "ocr": "HOME 3 AWAY 0",
     "frame_labels": ["player shoots", "ball hoop", "scoreboard", "fans", "bench"]},
    {"caption": "a woman in a red jacket cheers", "asr": "", "ocr": "",
     "frame_labels": ["woman red jacket", "stands", "clapping", "banner", "lights"]},
    {"caption": "the coach calls a timeout after a foul", "asr": "why did the coach stop the game",
     "ocr": "TIMEOUT", "frame_labels": ["coach", "referee foul", "huddle", "clipboard", "bench"]},
    {"caption": "the team celebrates the win", "asr": "teamwork won the game tonight", "ocr": "FINAL",
     "frame_labels": ["team celebrates", "confetti", "trophy", "scoreboard", "crowd"]},
]


def write_bundle(root: Path, clips: list[dict], video_id: str = "vid", duration_s: float | None = None,
                 clip_len_s: float = 30.0) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    (root / "clips").mkdir(exist_ok=True)
    duration = duration_s if duration_s is not None else clip_len_s * len(clips)
    (root / "manifest.json").write_text(json.dumps(
        {"video_id": video_id, "duration_s": duration, "clip_len_s": clip_len_s}))
    for i, c in enumerate(clips):
        (root / "clips" / f"{i}.json").write_text(json.dumps(c))
    return root


@pytest.fixture
def gateway() -> Gateway:
    return Gateway.mock(dim=8)


@pytest.fixture
def six_clip_dir(tmp_path) -> Path:
    return write_bundle(tmp_path / "bundle", SIX_CLIPS)


@pytest.fixture
def six_clip_bundle(six_clip_dir):
    return load_fixture_dir(six_clip_dir)


@pytest.fixture(scope="session")
def six_clip_index(tmp_path_factory):
    root = write_bundle(tmp_path_factory.mktemp("six") / "bundle", SIX_CLIPS)
    return build_index(load_fixture_dir(root), Gateway.mock(dim=8), EngineConfig())


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_RESULTS, format_result

    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for row in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(format_result(row))
