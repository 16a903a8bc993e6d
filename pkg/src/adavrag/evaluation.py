"""Pairwise LLM-judge win rates and multiple-choice accuracy over benchmark manifests."""

from __future__ import annotations

import json
import re
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import EmptyVerdicts, ManifestError, NotMCQ, PreconditionError, UnknownItem
from .prompts import PromptTemplate, load_template

DIMENSIONS = ("comprehensiveness", "empowerment", "trustworthiness", "depth", "density", "overall")
ROW_LABELS = {
    "comprehensiveness": "Comprehensiveness",
    "empowerment": "Empowerment",
    "trustworthiness": "Trustworthiness",
    "depth": "Depth",
    "density": "Density",
    "overall": "Overall Winner",
}
OPTION_LETTERS = "ABCDE"

_LETTER_RE = re.compile(r"(?<![A-Za-z])([A-E])(?![A-Za-z])")


@dataclass(frozen=True)
class BenchmarkItem:
    item_id: str
    video_id: str
    query: str
    kind: str = "open"
    level_label: str | None = None
    options: tuple[str, ...] = ()
    gold: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("open", "mcq"):
            raise PreconditionError(f"item kind must be open or mcq, got {self.kind!r}")
        if self.kind == "mcq":
            if len(self.options) < 2:
                raise PreconditionError(f"mcq item {self.item_id} needs at least two options")
            letters = OPTION_LETTERS[: len(self.options)]
            if not self.gold or self.gold.upper() not in letters:
                raise PreconditionError(f"mcq item {self.item_id} gold must be one of {letters}")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BenchmarkItem":
        return cls(
            item_id=str(d["item_id"]),
            video_id=str(d.get("video_id", "")),
            query=str(d["query"]),
            kind=d.get("kind", "open"),
            level_label=d.get("level_label"),
            options=tuple(d.get("options") or ()),
            gold=d.get("gold"),
        )


@dataclass(frozen=True)
class JudgeVerdict:
    item_id: str
    dimension: str
    winner: str  # "A" | "B" | "tie"
    order: str  # "AB" | "BA"


@dataclass
class WinRateReport:
    scores: dict[str, tuple[float, float]]
    n_items: int
    labels: tuple[str, str] = ("A", "B")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_items": self.n_items,
            "labels": list(self.labels),
            "dimensions": {d: {"a_pct": a, "b_pct": b} for d, (a, b) in self.scores.items()},
        }

    def table(self) -> str:
        a, b = self.labels
        width = max(len(v) for v in ROW_LABELS.values())
        col = max(10, len(a), len(b))
        lines = [f"{'Metric':<{width}}  {a:>{col}}  {b:>{col}}"]
        for d in DIMENSIONS:
            if d in self.scores:
                pa, pb = self.scores[d]
                lines.append(f"{ROW_LABELS[d]:<{width}}  {pa:>{col - 1}.2f}%  {pb:>{col - 1}.2f}%")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# judging
# ---------------------------------------------------------------------------

_DIM_LINE = re.compile(
    r"^\s*\**\s*(comprehensiveness|empowerment|trustworthiness|depth|density|overall(?:\s+winner)?)\s*\**\s*[:\-]\s*(.+)$",
    re.IGNORECASE | re.MULTILINE,
)


def parse_judgement(text: str) -> dict[str, str]:
    """Map each dimension to ``"1"``, ``"2"`` or ``"tie"``; unparseable dimensions are ties."""
    out = {d: "tie" for d in DIMENSIONS}
    seen: set[str] = set()
    for m in _DIM_LINE.finditer(text):
        dim = m.group(1).lower().split()[0]
        if dim in seen:
            continue
        seen.add(dim)
        val = m.group(2).lower()
        has1 = re.search(r"\banswer\s*1\b|^\s*1\b", val) is not None
        has2 = re.search(r"\banswer\s*2\b|^\s*2\b", val) is not None
        if has1 and not has2:
            out[dim] = "1"
        elif has2 and not has1:
            out[dim] = "2"
    return out


def judge_pair(item: BenchmarkItem, answer_a: str, answer_b: str, gateway,
               template: PromptTemplate | None = None) -> list[JudgeVerdict]:
    """Judge both presentation orders so position bias cancels out."""
    if not answer_a.strip() or not answer_b.strip():
        raise PreconditionError(f"item {item.item_id}: both answers must be non-empty")
    template = template or load_template("pairwise_judge")
    verdicts = []
    for order, first, second in (("AB", answer_a, answer_b), ("BA", answer_b, answer_a)):
        raw = gateway.complete_text(template.render(query=item.query, answer_1=first, answer_2=second))
        for dim, pick in parse_judgement(raw).items():
            if pick == "tie":
                winner = "tie"
            elif order == "AB":
                winner = "A" if pick == "1" else "B"
            else:
                winner = "B" if pick == "1" else "A"
            verdicts.append(JudgeVerdict(item.item_id, dim, winner, order))
    return verdicts


def win_rate(verdicts: Iterable[JudgeVerdict], labels: tuple[str, str] = ("A", "B")) -> WinRateReport:
    """Per-dimension percentages.

    An item scores 1/0 for the side that wins every order it was judged in;
    a split decision or any tie scores 0.5/0.5.
    """
    grouped: dict[tuple[str, str], list[str]] = defaultdict(list)
    items: set[str] = set()
    for v in verdicts:
        grouped[(v.item_id, v.dimension)].append(v.winner)
        items.add(v.item_id)
    if not items:
        raise EmptyVerdicts("no verdicts to aggregate")
    n = len(items)
    scores = {}
    for d in DIMENSIONS:
        a_pts = b_pts = 0.0
        judged = 0
        for item_id in items:
            winners = grouped.get((item_id, d))
            if not winners:
                continue
            judged += 1
            if all(w == "A" for w in winners):
                a_pts += 1.0
            elif all(w == "B" for w in winners):
                b_pts += 1.0
            else:
                a_pts += 0.5
                b_pts += 0.5
        if judged:
            scores[d] = (a_pts / judged * 100.0, b_pts / judged * 100.0)
    return WinRateReport(scores, n, labels)


def judge_all(items: Sequence[BenchmarkItem], answers_a: dict[str, str], answers_b: dict[str, str],
              gateway, jobs: int = 1) -> list[JudgeVerdict]:
    template = load_template("pairwise_judge")
    work = [it for it in items if it.kind == "open"]
    for it in work:
        if it.item_id not in answers_a or it.item_id not in answers_b:
            raise UnknownItem(f"no answer for item {it.item_id}")

    def one(it: BenchmarkItem) -> list[JudgeVerdict]:
        return judge_pair(it, answers_a[it.item_id], answers_b[it.item_id], gateway, template)

    if jobs <= 1:
        results = [one(it) for it in work]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(one, work))
    return [v for batch in results for v in batch]


# ---------------------------------------------------------------------------
# multiple choice
# ---------------------------------------------------------------------------


def extract_letter(text: str) -> str | None:
    """First standalone A-E token, e.g. ``"The answer is (B)."`` gives ``"B"``."""
    m = _LETTER_RE.search(text.strip())
    return m.group(1) if m else None


def score_mcq(answers: Iterable[tuple[str, str]], items: Iterable[BenchmarkItem]) -> float:
    by_id = {it.item_id: it for it in items}
    answers = list(answers)
    if not answers:
        raise PreconditionError("no predictions to score")
    correct = 0
    for item_id, predicted in answers:
        item = by_id.get(item_id)
        if item is None:
            raise UnknownItem(f"prediction for unknown item {item_id}")
        if item.kind != "mcq":
            raise NotMCQ(f"item {item_id} is not multiple choice")
        letter = extract_letter(predicted)
        correct += int(letter is not None and letter == item.gold.upper())
    return correct / len(answers)


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------


def _jsonl(path: str | Path) -> list[tuple[int, dict[str, Any]]]:
    p = Path(path)
    rows = []
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(str(p), lineno, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ManifestError(str(p), lineno, "expected a JSON object")
        rows.append((lineno, obj))
    return rows


def load_manifest(path: str | Path) -> list[BenchmarkItem]:
    items = []
    for lineno, obj in _jsonl(path):
        try:
            items.append(BenchmarkItem.from_dict(obj))
        except (KeyError, TypeError, PreconditionError) as exc:
            raise ManifestError(str(path), lineno, f"bad benchmark item: {exc}") from exc
    return items


def load_answers(path: str | Path) -> dict[str, str]:
    """Answer files are JSON-lines of ``{"item_id", "answer"}``."""
    out = {}
    for lineno, obj in _jsonl(path):
        if "item_id" not in obj or "answer" not in obj:
            raise ManifestError(str(path), lineno, "answer records need item_id and answer")
        out[str(obj["item_id"])] = str(obj["answer"])
    return out
