"""End-to-end composition: bundle -> index, and query -> answer record."""

from __future__ import annotations

import logging
import time
from typing import Any

from .config import EngineConfig
from .generation import Answer, answer, answer_record, assemble_context
from .index.graph import build_graph
from .index.store import OmniIndex, VisionEntry
from .ingestion import extract_all, sample_frames, segment_video
from .levels import Level
from .media import MediaBundle
from .retrieval import EvidencePool, Retriever
from .router import IntentLevel, IntentRouter, force_level

log = logging.getLogger(__name__)


def build_index(
    bundles: MediaBundle | list[MediaBundle],
    gateway,
    cfg: EngineConfig | None = None,
    jobs: int = 1,
) -> OmniIndex:
    """Segment, sample, extract, embed and graph every bundle, then freeze the index."""
    cfg = cfg or EngineConfig()
    if isinstance(bundles, MediaBundle):
        bundles = [bundles]
    index: OmniIndex | None = None
    for bundle in bundles:
        clip_len = bundle.clip_len_s or cfg.clip_len_s
        clips = segment_video(bundle, clip_len)
        frame_sets = [sample_frames(c, cfg.frames_per_clip, bundle) for c in clips]
        extracted = extract_all(clips, frame_sets, gateway, jobs=jobs)
        vision = [gateway.embed_frames(fs) for fs in frame_sets]
        if index is None:
            text_dim = next(
                (ch.embedding.size for per in extracted for ch in per.values() if ch.embedding is not None),
                gateway.text_dim or cfg.embed_dim,
            )
            index = OmniIndex(text_dim, vision[0].size, cfg.frames_per_clip, config=cfg.to_dict())
        if bundle.video_id in index.video_ids:
            raise ValueError(f"video_id {bundle.video_id!r} already indexed")
        for clip, per, vec in zip(clips, extracted, vision):
            index.add_clip(clip)
            for chunk in per.values():
                index.add_chunk(chunk)
            index.add_vision(VisionEntry(clip.video_id, clip.clip_id, vec))
        chunks = [ch for per in extracted for ch in per.values() if not ch.empty]
        index.graphs[bundle.video_id] = build_graph(chunks, gateway, video_id=bundle.video_id)
        log.info("indexed %s: %d clips", bundle.video_id, len(clips))
    if index is None:
        raise ValueError("no bundles to index")
    index.freeze()
    return index


class Pipeline:
    """Classify, retrieve, assemble and answer one query at a time.

    Stateless across queries apart from the read-only index.
    """

    def __init__(self, index: OmniIndex, gateway, cfg: EngineConfig | None = None, jobs: int = 1):
        self.index = index
        self.gateway = gateway
        self.cfg = cfg or EngineConfig()
        self.router = IntentRouter(gateway, prompt_dir=self.cfg.prompt_dir)
        self.retriever = Retriever(index, gateway, self.cfg.retrieval, prompt_dir=self.cfg.prompt_dir, jobs=jobs)

    def classify(self, query: str, level: Level | str | int | None = None) -> IntentLevel:
        return force_level(query, level) if level is not None else self.router.classify(query)

    def run(self, query: str, level: Level | str | int | None = None) -> tuple[IntentLevel, EvidencePool, Answer]:
        timings: dict[str, float] = {}
        t = time.perf_counter()
        intent = self.classify(query, level)
        timings["classify"] = (time.perf_counter() - t) * 1000.0

        reads0 = self.index.reads
        t = time.perf_counter()
        pool = self.retriever.retrieve(query, intent.level)
        timings["retrieve"] = (time.perf_counter() - t) * 1000.0
        pool.trace["index_reads"] = self.index.reads - reads0

        t = time.perf_counter()
        ctx = assemble_context(intent.level, pool, self.index.all_clips(), query)
        timings["assemble"] = (time.perf_counter() - t) * 1000.0

        ans = answer(query, ctx, self.gateway, timings)
        ans.timings["total"] = sum(v for k, v in ans.timings.items() if k != "total")
        return intent, pool, ans

    def query(self, query: str, level: Level | str | int | None = None) -> dict[str, Any]:
        intent, pool, ans = self.run(query, level)
        return answer_record(
            query,
            ans,
            source=intent.source,
            index_reads=pool.trace.get("index_reads", 0),
            flags=pool.flags,
            degraded=not ans.evidence_clip_ids and intent.level is not Level.L1,
        )
