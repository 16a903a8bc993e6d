"""Shared builders and comparison helpers for the test suite."""

from __future__ import annotations

import random
import time
from collections import deque
from contextlib import contextmanager

import numpy as np

from adavrag.config import RetrievalConfig
from adavrag.gateway.mock import bag_of_words
from adavrag.index.graph import KnowledgeGraph
from adavrag.index.store import OmniIndex, TextChunk, VisionEntry
from adavrag.ingestion import chunk_id_for
from adavrag.levels import Level
from adavrag.media import ClipRecord
from adavrag.retrieval import ClipHit, EvidencePool, GraphSnippet, SnippetRef


def index_state(index: OmniIndex) -> dict:
    """Plain-data snapshot of everything an index holds, for deep equality checks."""
    graphs = {}
    for vid, g in sorted(index.graphs.items()):
        graphs[vid] = {
            "entities": {k: e.to_dict() for k, e in sorted(g.entities.items())},
            "relations": {k: r.to_dict() for k, r in sorted(g.relations.items())},
            "adjacency": {k: sorted(v) for k, v in sorted(g.adjacency.items())},
            "ent_vecs": {k: g.entity_vectors.vector(k).tolist() for k in g.entity_vectors.ids},
            "rel_vecs": {k: g.relation_vectors.vector(k).tolist() for k in g.relation_vectors.ids},
        }
    return {
        "dims": (index.text_dim, index.vision_dim, index.frames_per_clip),
        "chunks": {k: c.to_dict() for k, c in sorted(index.chunks.items())},
        "bases": {m: sorted(b.ids) for m, b in index.bases.items()},
        "vision": {k: e.to_dict() for k, e in sorted(index.vision_entries.items())},
        "clips": {f"{k[0]}:{k[1]}": c.to_dict() for k, c in sorted(index.clips.items())},
        "graphs": graphs,
    }


def bfs_oracle(graph: KnowledgeGraph, seeds: set[str], hops: int) -> tuple[set[str], set[str]]:
    """Independent breadth-first expansion over an explicit undirected edge list."""
    nbrs: dict[str, set[str]] = {e: set() for e in graph.entities}
    for r in graph.relations.values():
        nbrs[r.head_entity_id].add(r.tail_entity_id)
        nbrs[r.tail_entity_id].add(r.head_entity_id)
    start = {s for s in seeds if s in graph.entities}
    seed_rels = {s for s in seeds if s in graph.relations}
    for s in seed_rels:
        start |= {graph.relations[s].head_entity_id, graph.relations[s].tail_entity_id}
    seen = {s: 0 for s in start}
    q = deque(start)
    while q:
        u = q.popleft()
        if seen[u] >= hops:
            continue
        for v in nbrs[u]:
            if v not in seen:
                seen[v] = seen[u] + 1
                q.append(v)
    ents = set(seen)
    rels = seed_rels | {rid for rid, r in graph.relations.items()
                        if r.head_entity_id in ents and r.tail_entity_id in ents}
    return ents, rels


def synthetic_index(rng: random.Random, dim: int = 16, n_clips: int | None = None,
                    vocab_size: int = 40, video_id: str = "syn") -> OmniIndex:
    """Random index over a synthetic vocabulary with mock embeddings, no graph."""
    vocab = [f"w{i}" for i in range(vocab_size)]
    n = n_clips or rng.randint(2, 8)
    index = OmniIndex(dim, dim * 2, frames_per_clip=2)
    for cid in range(n):
        clip = ClipRecord(video_id, cid, 30.0 * cid, 30.0 * (cid + 1))
        index.add_clip(clip)
        for modality in ("caption", "asr", "ocr"):
            text = " ".join(rng.sample(vocab, rng.randint(1, 4)))
            index.add_chunk(TextChunk(chunk_id_for(video_id, cid, modality), video_id, cid, modality, text,
                                      bag_of_words(text, dim), (clip.start_s, clip.end_s)))
        labels = [" ".join(rng.sample(vocab, 2)) for _ in range(2)]
        vec = np.concatenate([bag_of_words(lbl, dim) for lbl in labels])
        index.add_vision(VisionEntry(video_id, cid, vec / np.linalg.norm(vec)))
    return index


def random_query(rng: random.Random, vocab_size: int = 40) -> str:
    return " ".join(f"w{rng.randrange(vocab_size)}" for _ in range(rng.randint(1, 3)))


def loose_config(rng: random.Random) -> RetrievalConfig:
    return RetrievalConfig(
        sim_threshold=rng.choice([-0.2, 0.0, 0.2, 0.5]),
        top_k_visual=rng.randint(1, 5),
        top_k_text=rng.randint(1, 3),
        graph_hops=rng.randint(0, 2),
        top_n_graph_seeds=rng.randint(1, 5),
    )


def random_pool(rng: random.Random, level: Level | None = None) -> EvidencePool:
    """Evidence pool with overlapping clip lists and duplicate snippets across two videos."""
    level = level or rng.choice([Level.L2, Level.L3])
    universe = [(v, c) for v in ("va", "vb") for c in range(6)]

    def hits(n):
        return [ClipHit(v, c, 30.0 * c, 30.0 * (c + 1), round(rng.uniform(-1, 1), 3))
                for v, c in rng.sample(universe, n)]

    snippets = []
    for _ in range(rng.randint(0, 8)):
        v, c = rng.choice(universe)
        m = rng.choice(["caption", "asr", "ocr"])
        snippets.append(SnippetRef(f"{v}:{c}:{m}", v, c, 30.0 * c, m, f"text {v} {c} {m}",
                                   round(rng.uniform(-1, 1), 3)))
    gsnips = []
    if level is Level.L3:
        for _ in range(rng.randint(0, 4)):
            v, c = rng.choice(universe)
            gsnips.append(GraphSnippet(v, c, 30.0 * c, (f"[clip {c} @ 00:00] graph", f"ENTITY t | e{c} | x | d")))
    return EvidencePool(
        level,
        visual_clips=hits(rng.randint(0, 5)),
        text_clips=hits(rng.randint(0, 5)),
        text_snippets=snippets,
        graph_clips=hits(rng.randint(0, 4)) if level is Level.L3 else [],
        graph_snippets=gsnips,
    )


# acceptance bookkeeping: (number, title, passed, elapsed_s, limit_s, detail)
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, float, float, str]] = []


@contextmanager
def criterion(number: int, title: str, limit_s: float):
    """Time a block, record pass/fail for the summary, and enforce the time limit."""
    t0 = time.perf_counter()
    detail = ""
    passed = False
    try:
        yield
        passed = True
    except BaseException as exc:
        detail = f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        raise
    finally:
        elapsed = time.perf_counter() - t0
        if passed and elapsed >= limit_s:
            passed = False
            detail = f"exceeded time limit ({elapsed:.2f}s >= {limit_s:g}s)"
        ACCEPTANCE_RESULTS.append((number, title, passed, elapsed, limit_s, detail))
        print(format_result(ACCEPTANCE_RESULTS[-1]))
    assert elapsed < limit_s, detail


def format_result(row) -> str:
    number, title, passed, elapsed, limit_s, detail = row
    status = "PASS" if passed else "FAIL"
    line = f"[{status}] AC{number} {title} ({elapsed:.2f}s, limit {limit_s:g}s)"
    return f"{line}: {detail}" if detail else line
