"""Adaptive retrieval: query rewriting, naive text and visual retrieval, graph retrieval,
then dedup, LLM fine filtering and temporal reranking into an evidence pool."""

from __future__ import annotations

import dataclasses
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

from .config import RetrievalConfig
from .errors import AdaVRAGError, EmptyGraph, PreconditionError
from .index.graph import KnowledgeGraph, graph_neighborhood
from .index.store import OmniIndex
from .levels import Level
from .prompts import PromptTemplate, load_template
from .text import format_ts

log = logging.getLogger(__name__)

_SOURCE_PRIORITY = ("visual", "text", "graph")
_MODALITY_ORDER = {"caption": 0, "asr": 1, "ocr": 2}
_VERDICT = re.compile(r"\b(KEEP|DROP)\b", re.IGNORECASE)


@dataclass(frozen=True)
class RewrittenQuery:
    original: str
    caption_form: str
    asr_form: str
    ocr_form: str
    rewrite_failed: tuple[str, ...] = ()


@dataclass(frozen=True)
class ClipHit:
    video_id: str
    clip_id: int
    start_s: float
    end_s: float
    score: float = 0.0

    @property
    def key(self) -> tuple[str, int]:
        return (self.video_id, self.clip_id)


@dataclass(frozen=True)
class SnippetRef:
    chunk_id: str
    video_id: str
    clip_id: int
    start_s: float
    modality: str
    text: str
    score: float = 0.0

    @property
    def clip_key(self) -> tuple[str, int]:
        return (self.video_id, self.clip_id)


@dataclass(frozen=True)
class GraphSnippet:
    """Serialized slice of the query-centered subgraph sourced from one clip.

    ``lines[0]`` is the clip header; the rest are entity / relation detail lines.
    """

    video_id: str
    clip_id: int
    start_s: float
    lines: tuple[str, ...]

    @property
    def clip_key(self) -> tuple[str, int]:
        return (self.video_id, self.clip_id)


@dataclass
class EvidencePool:
    level: Level
    visual_clips: list[ClipHit] = field(default_factory=list)
    text_clips: list[ClipHit] = field(default_factory=list)
    text_snippets: list[SnippetRef] = field(default_factory=list)
    graph_clips: list[ClipHit] = field(default_factory=list)
    graph_snippets: list[GraphSnippet] = field(default_factory=list)
    flags: dict[str, Any] = field(default_factory=dict)
    trace: dict[str, Any] = field(default_factory=dict)

    def clip_keys(self) -> set[tuple[str, int]]:
        return {c.key for c in self.visual_clips + self.text_clips + self.graph_clips}

    def all_clips(self) -> list[ClipHit]:
        return self.visual_clips + self.text_clips + self.graph_clips

    def is_empty(self) -> bool:
        return not (self.visual_clips or self.text_clips or self.graph_clips or self.text_snippets
                    or self.graph_snippets)

    def copy(self) -> "EvidencePool":
        return dataclasses.replace(
            self,
            visual_clips=list(self.visual_clips),
            text_clips=list(self.text_clips),
            text_snippets=list(self.text_snippets),
            graph_clips=list(self.graph_clips),
            graph_snippets=list(self.graph_snippets),
            flags=dict(self.flags),
            trace=dict(self.trace),
        )


# ---------------------------------------------------------------------------
# rewriting
# ---------------------------------------------------------------------------


def parse_rewrite(text: str) -> dict[str, str]:
    out = {}
    for label in ("CAPTION", "ASR", "OCR"):
        m = re.search(rf"^\s*{label}\s*:\s*(.+?)\s*$", text, re.IGNORECASE | re.MULTILINE)
        if m and m.group(1).strip():
            out[label.lower()] = m.group(1).strip()
    return out


def rewrite_query(query: str, gateway, template: PromptTemplate | None = None) -> RewrittenQuery:
    """One LLM call producing caption-, ASR- and OCR-adapted forms of ``query``.

    A slot that cannot be parsed, or a backend failure, falls back to the
    original query and is listed in ``rewrite_failed``.
    """
    if not query or not query.strip():
        raise PreconditionError("query must be non-empty")
    template = template or load_template("query_rewrite")
    try:
        parsed = parse_rewrite(gateway.complete_text(template.render(query=query.strip())))
    except AdaVRAGError as exc:
        log.warning("query rewrite failed: %s", exc)
        parsed = {}
    forms = {slot: parsed.get(slot, query) for slot in ("caption", "asr", "ocr")}
    failed = tuple(slot for slot in ("caption", "asr", "ocr") if slot not in parsed)
    return RewrittenQuery(query, forms["caption"], forms["asr"], forms["ocr"], failed)


# ---------------------------------------------------------------------------
# naive + visual
# ---------------------------------------------------------------------------


def _run_legs(legs: list[Callable[[], Any]], jobs: int) -> list[Any]:
    if jobs <= 1 or len(legs) == 1:
        return [leg() for leg in legs]
    with ThreadPoolExecutor(max_workers=min(jobs, len(legs))) as ex:
        return list(ex.map(lambda f: f(), legs))


def naive_retrieve(
    rw: RewrittenQuery, index: OmniIndex, gateway, cfg: RetrievalConfig, jobs: int = 1
) -> tuple[list[ClipHit], list[SnippetRef]]:
    """Search the caption, ASR and OCR bases with their matching rewritten form."""
    forms = {"caption": rw.caption_form, "asr": rw.asr_form, "ocr": rw.ocr_form}

    def leg(modality: str):
        vec = gateway.embed_text(forms[modality])
        return modality, index.knn_search(modality, vec, cfg.top_k_text, cfg.sim_threshold)

    results = _run_legs([lambda m=m: leg(m) for m in forms], jobs)
    clips, snippets = [], []
    for _modality, hits in results:
        for chunk_id, score in hits:
            ch = index.get_chunk(chunk_id)
            clip = index.clip(ch.video_id, ch.clip_id)
            clips.append(ClipHit(ch.video_id, ch.clip_id, clip.start_s, clip.end_s, score))
            snippets.append(SnippetRef(chunk_id, ch.video_id, ch.clip_id, clip.start_s, ch.modality, ch.text, score))
    return clips, snippets


def visual_ground(caption_form: str, index: OmniIndex, gateway, cfg: RetrievalConfig) -> list[ClipHit]:
    """Match the caption-form query against concatenated frame embeddings."""
    if len(index.vision) == 0:
        return []
    vec = gateway.embed_text_visual(caption_form, index.frames_per_clip)
    hits = index.knn_search("vision", vec, cfg.top_k_visual, cfg.sim_threshold)
    out = []
    for entry_id, score in hits:
        e = index.vision_entries[entry_id]
        clip = index.clip(e.video_id, e.clip_id)
        out.append(ClipHit(e.video_id, e.clip_id, clip.start_s, clip.end_s, score))
    return out


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------


def serialize_subgraph(graph: KnowledgeGraph, entity_ids, relation_ids, index: OmniIndex) -> list[GraphSnippet]:
    """Group entity and relation lines under each source clip, in clip order."""
    per_clip: dict[tuple[str, int], list[str]] = {}

    def clips_of(chunk_ids) -> set[tuple[str, int]]:
        out = set()
        for cid in chunk_ids:
            ch = index.chunks.get(cid)
            if ch is not None:
                out.add((ch.video_id, ch.clip_id))
        return out

    for eid in sorted(entity_ids, key=lambda e: graph.entities[e].name.casefold()):
        ent = graph.entities[eid]
        line = f"ENTITY {ent.entity_type} | {ent.name} | {ent.spatiotemporal} | {ent.description}"
        for key in clips_of(ent.source_chunk_ids):
            per_clip.setdefault(key, []).append(line)
    for rid in sorted(relation_ids, key=lambda r: graph.relation_text(graph.relations[r]).casefold()):
        rel = graph.relations[rid]
        h = graph.entities[rel.head_entity_id].name
        t = graph.entities[rel.tail_entity_id].name
        line = f"REL {h} -[{rel.kind}: {rel.description}]-> {t}"
        for key in clips_of(rel.source_chunk_ids):
            per_clip.setdefault(key, []).append(line)

    out = []
    for key in sorted(per_clip, key=lambda k: (k[0], index.clip(*k).start_s)):
        clip = index.clip(*key)
        header = f"[clip {clip.clip_id} @ {format_ts(clip.start_s)}] graph"
        out.append(GraphSnippet(clip.video_id, clip.clip_id, clip.start_s, (header, *per_clip[key])))
    return out


def graph_retrieve(
    rw: RewrittenQuery, graph: KnowledgeGraph, index: OmniIndex, gateway, cfg: RetrievalConfig
) -> tuple[list[ClipHit], list[GraphSnippet]]:
    """Seed on the closest entities and relations, expand, and serialize the neighborhood."""
    if not graph.entities:
        raise EmptyGraph(f"graph for {graph.video_id!r} is empty")
    vec = gateway.embed_text(rw.caption_form)
    ent_hits, rel_hits = graph.search_seeds(vec, cfg.top_n_graph_seeds)
    seed_score: dict[str, float] = {i: s for i, s in ent_hits + rel_hits}
    sub = graph_neighborhood(graph, seed_score, cfg.graph_hops)
    snippets = serialize_subgraph(graph, sub.entity_ids, sub.relation_ids, index)

    best: dict[tuple[str, int], float] = {}
    for elem_id, score in seed_score.items():
        src = (graph.entities[elem_id] if elem_id in graph.entities else graph.relations[elem_id]).source_chunk_ids
        for cid in src:
            ch = index.chunks.get(cid)
            if ch is not None:
                k = (ch.video_id, ch.clip_id)
                best[k] = max(best.get(k, -1.0), score)
    keys = set()
    for cid in sub.source_chunk_ids:
        ch = index.chunks.get(cid)
        if ch is not None:
            keys.add((ch.video_id, ch.clip_id))
    clips = []
    for key in sorted(keys, key=lambda k: (k[0], index.clip(*k).start_s)):
        c = index.clip(*key)
        clips.append(ClipHit(c.video_id, c.clip_id, c.start_s, c.end_s, best.get(key, 0.0)))
    return clips, snippets


# ---------------------------------------------------------------------------
# filtering and ordering
# ---------------------------------------------------------------------------


def dedup_filter(pool: EvidencePool) -> EvidencePool:
    """Keep each clip once, in the highest-priority list (visual > text > graph), with its max score.

    Text snippets are deduplicated by chunk id and graph snippets by clip.
    """
    lists = {"visual": pool.visual_clips, "text": pool.text_clips, "graph": pool.graph_clips}
    best: dict[tuple[str, int], float] = {}
    home: dict[tuple[str, int], str] = {}
    for src in _SOURCE_PRIORITY:
        for c in lists[src]:
            best[c.key] = max(best.get(c.key, c.score), c.score)
            home.setdefault(c.key, src)
    new: dict[str, list[ClipHit]] = {s: [] for s in _SOURCE_PRIORITY}
    placed: set[tuple[str, int]] = set()
    for src in _SOURCE_PRIORITY:
        for c in lists[src]:
            if home[c.key] != src or c.key in placed:
                continue
            placed.add(c.key)
            new[src].append(dataclasses.replace(c, score=best[c.key]))

    snip_best: dict[str, SnippetRef] = {}
    for s in pool.text_snippets:
        cur = snip_best.get(s.chunk_id)
        if cur is None or s.score > cur.score:
            snip_best[s.chunk_id] = s
    seen_chunks: set[str] = set()
    snippets = []
    for s in pool.text_snippets:
        if s.chunk_id not in seen_chunks:
            seen_chunks.add(s.chunk_id)
            snippets.append(snip_best[s.chunk_id])

    seen_graph: set[tuple[str, int]] = set()
    gsnips = []
    for g in pool.graph_snippets:
        if g.clip_key not in seen_graph:
            seen_graph.add(g.clip_key)
            gsnips.append(g)

    out = pool.copy()
    out.visual_clips, out.text_clips, out.graph_clips = new["visual"], new["text"], new["graph"]
    out.text_snippets, out.graph_snippets = snippets, gsnips
    return out


def temporal_rerank(pool: EvidencePool) -> EvidencePool:
    """Sort every list by original video time, grouped by video."""
    out = pool.copy()
    clip_key = lambda c: (c.video_id, c.start_s, c.clip_id)  # noqa: E731
    out.visual_clips = sorted(pool.visual_clips, key=clip_key)
    out.text_clips = sorted(pool.text_clips, key=clip_key)
    out.graph_clips = sorted(pool.graph_clips, key=clip_key)
    out.text_snippets = sorted(
        pool.text_snippets, key=lambda s: (s.video_id, s.start_s, s.clip_id, _MODALITY_ORDER[s.modality], s.chunk_id)
    )
    out.graph_snippets = sorted(pool.graph_snippets, key=lambda g: (g.video_id, g.start_s, g.clip_id))
    return out


def parse_verdict(text: str) -> str:
    m = _VERDICT.search(text)
    return m.group(1).upper() if m else "KEEP"


def _clip_texts(index: OmniIndex, key: tuple[str, int]) -> str:
    chunks = sorted(index.chunks_for_clip(*key), key=lambda c: _MODALITY_ORDER[c.modality])
    return "\n".join(f"{c.modality}: {c.text}" for c in chunks if c.text)


def llm_fine_filter(
    pool: EvidencePool, query: str, index: OmniIndex, gateway, template: PromptTemplate | None = None
) -> EvidencePool:
    """Ask the LLM to KEEP or DROP each candidate clip.

    Unparseable verdicts keep the clip. Any backend failure leaves the pool
    unchanged with ``flags["filter_skipped"]`` set.
    """
    template = template or load_template("evidence_filter")
    keys = sorted({c.key for c in pool.all_clips()} | {s.clip_key for s in pool.text_snippets}
                  | {g.clip_key for g in pool.graph_snippets})
    dropped: set[tuple[str, int]] = set()
    verdicts: dict[str, str] = {}
    try:
        for key in keys:
            texts = _clip_texts(index, key) or "(no text)"
            verdict = parse_verdict(gateway.complete_text(template.render(query=query, clip_texts=texts)))
            verdicts[f"{key[0]}:{key[1]}"] = verdict
            if verdict == "DROP":
                dropped.add(key)
    except AdaVRAGError as exc:
        log.warning("fine filter skipped: %s", exc)
        out = pool.copy()
        out.flags["filter_skipped"] = True
        return out
    out = pool.copy()
    out.visual_clips = [c for c in pool.visual_clips if c.key not in dropped]
    out.text_clips = [c for c in pool.text_clips if c.key not in dropped]
    out.graph_clips = [c for c in pool.graph_clips if c.key not in dropped]
    out.text_snippets = [s for s in pool.text_snippets if s.clip_key not in dropped]
    out.graph_snippets = [g for g in pool.graph_snippets if g.clip_key not in dropped]
    out.flags["filter_skipped"] = False
    out.trace["filter_verdicts"] = verdicts
    return out


# ---------------------------------------------------------------------------
# routing
# ---------------------------------------------------------------------------


class Retriever:
    """Routes a classified query to none, naive, or naive-plus-graph retrieval."""

    def __init__(self, index: OmniIndex, gateway, cfg: RetrievalConfig | None = None,
                 prompt_dir: str | None = None, jobs: int = 1):
        self.index = index
        self.gateway = gateway
        self.cfg = cfg or RetrievalConfig()
        self.jobs = jobs
        self.rewrite_template = load_template("query_rewrite", prompt_dir=prompt_dir)
        self.filter_template = load_template("evidence_filter", prompt_dir=prompt_dir)

    def retrieve(self, query: str, level: Level | str, fine_filter: bool = True) -> EvidencePool:
        level = Level.parse(getattr(level, "level", level))
        pool = EvidencePool(level)
        if level is Level.L1:
            return pool
        rw = rewrite_query(query, self.gateway, self.rewrite_template)
        pool.trace["rewrite"] = dataclasses.asdict(rw)
        if rw.rewrite_failed:
            pool.flags["rewrite_failed"] = list(rw.rewrite_failed)

        legs = [
            lambda: naive_retrieve(rw, self.index, self.gateway, self.cfg),
            lambda: visual_ground(rw.caption_form, self.index, self.gateway, self.cfg),
        ]
        (text_clips, snippets), visual = _run_legs(legs, self.jobs)
        pool.text_clips, pool.text_snippets, pool.visual_clips = text_clips, snippets, visual

        if level is Level.L3:
            used = 0
            for vid in sorted(self.index.graphs):
                try:
                    gclips, gsnips = graph_retrieve(rw, self.index.graphs[vid], self.index, self.gateway, self.cfg)
                except EmptyGraph:
                    continue
                used += 1
                pool.graph_clips += gclips
                pool.graph_snippets += gsnips
            if not used:
                pool.flags["graph_empty"] = True

        pool = dedup_filter(pool)
        pool.trace["prefilter_clips"] = sorted(pool.clip_keys())
        if fine_filter:
            pool = llm_fine_filter(pool, query, self.index, self.gateway, self.filter_template)
        return temporal_rerank(pool)


def retrieve(query: str, level, index: OmniIndex, gateway, cfg: RetrievalConfig | None = None,
             fine_filter: bool = True) -> EvidencePool:
    return Retriever(index, gateway, cfg).retrieve(query, level, fine_filter=fine_filter)
