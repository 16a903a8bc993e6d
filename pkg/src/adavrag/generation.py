"""Level-dependent context assembly and answer generation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

from .errors import ContextTooLarge, LevelMismatch
from .levels import Level
from .media import ClipRecord
from .retrieval import EvidencePool
from .text import format_ts, word_count

AUX_TEXTS = "AUX_TEXTS"
GRAPH_CONTEXT = "GRAPH_CONTEXT"
EMPTY_MARKER = "(none)"

SECTIONS_BY_LEVEL = {
    Level.L1: (),
    Level.L2: (AUX_TEXTS,),
    Level.L3: (AUX_TEXTS, GRAPH_CONTEXT),
}


@dataclass
class ContextLine:
    text: str
    score: float | None = None
    detail: bool = True  # graph header lines are not detail and are never dropped


@dataclass
class GenerationContext:
    level: Level
    query: str
    clip_refs: list[ClipRecord]
    sections: dict[str, list[ContextLine]] = field(default_factory=dict)
    evidence_clip_ids: list[int] = field(default_factory=list)
    degraded: bool = False
    dropped_lines: int = 0

    @property
    def section_labels(self) -> list[str]:
        return list(self.sections)

    def section_text(self, label: str) -> list[str]:
        return [ln.text for ln in self.sections.get(label, [])]

    def render(self) -> str:
        out = [f"LEVEL: {self.level}", f"QUERY: {self.query}", "CLIPS:"]
        for c in self.clip_refs:
            out.append(f"[clip {c.clip_id} @ {format_ts(c.start_s)}-{format_ts(c.end_s)}] {c.video_id}")
        for label, lines in self.sections.items():
            out.append(f"== {label} ==")
            if lines:
                out.extend(ln.text for ln in lines)
            else:
                out.append(EMPTY_MARKER)
        return "\n".join(out)

    def word_count(self) -> int:
        return word_count(self.render())


@dataclass
class Answer:
    text: str
    level: Level
    evidence_clip_ids: list[int]
    timings: dict[str, float] = field(default_factory=dict)
    context_sections: list[str] = field(default_factory=list)
    truncated_lines: int = 0


def assemble_context(level: Level | str, pool: EvidencePool, all_clips: list[ClipRecord], query: str) -> GenerationContext:
    """Build the generator input for ``level``.

    L1 passes the whole video. L2 adds auxiliary text lines, L3 also the
    serialized subgraph. An empty L2/L3 pool falls back to whole-video clip
    refs with ``degraded`` set.
    """
    level = Level.parse(level)
    if pool.level is not level:
        raise LevelMismatch(f"pool is {pool.level}, context requested for {level}")
    ordered = sorted(all_clips, key=lambda c: (c.video_id, c.start_s, c.clip_id))
    ctx = GenerationContext(level=level, query=query, clip_refs=ordered)
    if level is Level.L1:
        return ctx

    by_key = {c.key: c for c in ordered}
    evidence = sorted({c.key for c in pool.all_clips()}, key=lambda k: (k[0], by_key[k].start_s if k in by_key else 0.0, k[1]))
    if evidence:
        ctx.clip_refs = [by_key[k] for k in evidence if k in by_key]
        ctx.evidence_clip_ids = [k[1] for k in evidence]
    else:
        ctx.degraded = True

    snippets = sorted(pool.text_snippets, key=lambda s: (s.video_id, s.start_s, s.clip_id))
    ctx.sections[AUX_TEXTS] = [
        ContextLine(f"[clip {s.clip_id} @ {format_ts(s.start_s)}] {s.modality}: {s.text}", score=s.score)
        for s in snippets
    ]
    if level is Level.L3:
        lines: list[ContextLine] = []
        for g in sorted(pool.graph_snippets, key=lambda g: (g.video_id, g.start_s, g.clip_id)):
            lines.append(ContextLine(g.lines[0], detail=False))
            lines.extend(ContextLine(t) for t in g.lines[1:])
        ctx.sections[GRAPH_CONTEXT] = lines
    return ctx


def truncate_once(ctx: GenerationContext) -> bool:
    """Drop one line: the lowest-score auxiliary text first, then the last graph detail line."""
    aux = ctx.sections.get(AUX_TEXTS, [])
    if aux:
        # lowest score; among equals, the latest line
        idx = min(range(len(aux)), key=lambda i: (aux[i].score if aux[i].score is not None else 0.0, -i))
        aux.pop(idx)
        ctx.dropped_lines += 1
        return True
    graph = ctx.sections.get(GRAPH_CONTEXT, [])
    for i in range(len(graph) - 1, -1, -1):
        if graph[i].detail:
            graph.pop(i)
            ctx.dropped_lines += 1
            return True
    return False


def answer(query: str, context: GenerationContext, gateway, timings: dict[str, float] | None = None) -> Answer:
    """Generate the final answer, shrinking the context when it exceeds the budget.

    Clip refs are never dropped; if the context still does not fit once all
    droppable lines are gone, ContextTooLarge propagates.
    """
    timings = dict(timings or {})
    t0 = time.perf_counter()
    budget = gateway.token_budget
    while context.word_count() > budget and truncate_once(context):
        pass
    while True:
        try:
            text = gateway.generate_answer(context, query)
            break
        except ContextTooLarge:
            if not truncate_once(context):
                raise
    timings["generate"] = (time.perf_counter() - t0) * 1000.0
    return Answer(
        text=text,
        level=context.level,
        evidence_clip_ids=list(context.evidence_clip_ids),
        timings=timings,
        context_sections=context.section_labels,
        truncated_lines=context.dropped_lines,
    )


def answer_record(query: str, ans: Answer, **extra: Any) -> dict[str, Any]:
    rec = {
        "query": query,
        "level": str(ans.level),
        "answer": ans.text,
        "evidence_clip_ids": ans.evidence_clip_ids,
        "timings_ms": {k: round(v, 3) for k, v in ans.timings.items()},
        "context_sections": ans.context_sections,
    }
    rec.update(extra)
    return rec
