import random
from collections import Counter

import numpy as np
import pytest

from adavrag.config import RetrievalConfig
from adavrag.errors import BackendUnreachable, EmptyGraph, PreconditionError
from adavrag.gateway import Gateway, MockBackend
from adavrag.gateway.mock import bag_of_words
from adavrag.index.graph import KnowledgeGraph, build_graph
from adavrag.index.store import OmniIndex, TextChunk, VisionEntry
from adavrag.levels import Level
from adavrag.media import ClipRecord
from adavrag.retrieval import (
    ClipHit,
    EvidencePool,
    Retriever,
    RewrittenQuery,
    SnippetRef,
    dedup_filter,
    graph_retrieve,
    llm_fine_filter,
    naive_retrieve,
    rewrite_query,
    temporal_rerank,
    visual_ground,
)

from helpers import loose_config, random_pool, random_query, synthetic_index


class Down(MockBackend):
    def invoke(self, payload, params):
        raise BackendUnreachable(self.role, "http://x", 3, "down")


class Garbage(MockBackend):
    def invoke(self, payload, params):
        return "I cannot help with that."


def rq(text: str) -> RewrittenQuery:
    return RewrittenQuery(text, text, text, text)


def text_index(entries: list[tuple[str, int, str]], dim: int = 8) -> OmniIndex:
    """Index from (modality, clip_id, text) rows."""
    idx = OmniIndex(dim, dim)
    for cid in sorted({c for _, c, _ in entries}):
        idx.add_clip(ClipRecord("v", cid, 30.0 * cid, 30.0 * (cid + 1)))
    for modality, cid, text in entries:
        idx.add_chunk(TextChunk(f"v:{cid}:{modality}", "v", cid, modality, text, bag_of_words(text, dim),
                                (30.0 * cid, 30.0 * (cid + 1))))
    idx.freeze()
    return idx


class StubVisual:
    """Gateway stand-in returning a fixed visual query vector."""

    def __init__(self, vec):
        self.vec = np.asarray(vec, dtype=float)

    def embed_text_visual(self, text, frame_count):
        return self.vec


def vision_index(vectors: list[list[float]]) -> OmniIndex:
    dim = len(vectors[0])
    idx = OmniIndex(dim, dim, frames_per_clip=1)
    for cid, v in enumerate(vectors):
        idx.add_clip(ClipRecord("v", cid, 30.0 * cid, 30.0 * (cid + 1)))
        idx.add_vision(VisionEntry("v", cid, np.asarray(v, dtype=float)))
    idx.freeze()
    return idx


class TestRewrite:
    def test_rewrite_example(self, gateway):
        rw = rewrite_query("How did the Number 30 player perform?", gateway)
        assert rw.caption_form == "The performance of Number 30 player."
        assert rw.asr_form == "How's the number 30 player doing."
        assert rw.ocr_form == "Number 30 player"
        assert rw.rewrite_failed == ()

    def test_garbage_falls_back(self):
        rw = rewrite_query("what happened?", Gateway.mock(llm=Garbage("llm")))
        assert rw.caption_form == rw.asr_form == rw.ocr_form == "what happened?"
        assert set(rw.rewrite_failed) == {"caption", "asr", "ocr"}

    def test_backend_down_falls_back(self):
        rw = rewrite_query("q", Gateway.mock(llm=Down("llm")))
        assert rw.caption_form == "q"

    def test_empty(self, gateway):
        with pytest.raises(PreconditionError):
            rewrite_query(" ", gateway)


class TestNaiveRetrieve:
    def test_planted_rank_one(self, gateway):
        idx = text_index([("caption", 0, "the number 30 player scores"), ("caption", 1, "rain over a city street"),
                          ("caption", 2, "a dog sleeps on the porch")])
        clips, snippets = naive_retrieve(rq("number 30 player scores"), idx, gateway, RetrievalConfig(sim_threshold=-1))
        assert snippets[0].chunk_id == "v:0:caption"
        q = bag_of_words("number 30 player scores", 8)
        brute = sorted(((-float(q @ idx.bases["caption"].vector(c)), c) for c in idx.bases["caption"].ids))
        assert [s.chunk_id for s in snippets if s.modality == "caption"] == [c for _, c in brute][:3]

    def test_nothing_above_threshold(self, gateway):
        idx = text_index([("caption", 0, "alpha beta")])
        clips, snippets = naive_retrieve(rq("gamma delta"), idx, gateway, RetrievalConfig(sim_threshold=0.99))
        assert clips == [] and snippets == []

    def test_same_text_in_two_bases(self, gateway):
        idx = text_index([("caption", 0, "goal scored"), ("asr", 0, "goal scored")])
        clips, snippets = naive_retrieve(rq("goal scored"), idx, gateway, RetrievalConfig())
        assert sorted(s.modality for s in snippets) == ["asr", "caption"]
        assert len(clips) == 2

    def test_concurrent_legs_same_result(self, gateway):
        idx = synthetic_index(random.Random(5), dim=8)
        cfg = RetrievalConfig(sim_threshold=-1.0)
        assert naive_retrieve(rq("w1 w2"), idx, gateway, cfg, jobs=3) == naive_retrieve(rq("w1 w2"), idx, gateway, cfg)


class TestVisualGround:
    def test_engineered_threshold(self):
        idx = vision_index([[0.7, np.sqrt(0.51), 0, 0], [0.5, 0.5, 0.5, 0.5], [0.3, np.sqrt(0.91), 0, 0]])
        hits = visual_ground("q", idx, StubVisual([1, 0, 0, 0]), RetrievalConfig(sim_threshold=0.5, top_k_visual=5))
        assert [h.clip_id for h in hits] == [0]

    def test_truncation_to_k(self):
        vecs = [[1.0, 0.1 * i] for i in range(7)]
        idx = vision_index(vecs)
        hits = visual_ground("q", idx, StubVisual([1, 0]), RetrievalConfig(sim_threshold=0.5, top_k_visual=5))
        assert [h.clip_id for h in hits] == [0, 1, 2, 3, 4]

    def test_shared_labels_rank_above(self, gateway):
        idx = OmniIndex(8, 16, frames_per_clip=2)
        labels = {0: ["a red car", "red car parked"], 1: ["blue sky", "green tree"], 2: ["cat sleeping", "dog bark"]}
        for cid, lbls in labels.items():
            idx.add_clip(ClipRecord("v", cid, 30.0 * cid, 30.0 * cid + 30))
            v = np.concatenate([bag_of_words(x, 8) for x in lbls])
            idx.add_vision(VisionEntry("v", cid, v / np.linalg.norm(v)))
        idx.freeze()
        hits = visual_ground("red car", idx, gateway, RetrievalConfig(sim_threshold=-1.0))
        assert hits[0].clip_id == 0


class TestGraphRetrieve:
    def test_planted_player_clip(self, gateway, six_clip_index):
        g = six_clip_index.graphs["vid"]
        clips, snippets = graph_retrieve(rq("Number 30 player"), g, six_clip_index, gateway, RetrievalConfig())
        assert 2 in {c.clip_id for c in clips}
        assert all(s.lines[0].startswith(f"[clip {s.clip_id} @ ") for s in snippets)

    def test_zero_hops_only_seeds(self, gateway, six_clip_index):
        g = six_clip_index.graphs["vid"]
        cfg = RetrievalConfig(graph_hops=0, top_n_graph_seeds=2)
        vec = gateway.embed_text("Number 30 player")
        ents, rels = g.search_seeds(vec, 2)
        allowed = {g.entities[e].name for e, _ in ents}
        for r, _ in rels:
            allowed |= {g.entities[g.relations[r].head_entity_id].name, g.entities[g.relations[r].tail_entity_id].name}
        _, snippets = graph_retrieve(rq("Number 30 player"), g, six_clip_index, gateway, cfg)
        names = {ln.split(" | ")[1] for s in snippets for ln in s.lines[1:] if ln.startswith("ENTITY")}
        assert names and names <= allowed

    def test_empty_graph(self, gateway, six_clip_index):
        with pytest.raises(EmptyGraph):
            graph_retrieve(rq("x"), KnowledgeGraph("vid"), six_clip_index, gateway, RetrievalConfig())


def hit(cid, score=0.5, vid="v"):
    return ClipHit(vid, cid, 30.0 * cid, 30.0 * (cid + 1), score)


class TestDedup:
    def test_priority(self):
        pool = EvidencePool(Level.L2, visual_clips=[hit(1), hit(2, 0.4)], text_clips=[hit(2, 0.9), hit(3)])
        out = dedup_filter(pool)
        assert [c.clip_id for c in out.visual_clips] == [1, 2]
        assert [c.clip_id for c in out.text_clips] == [3]
        assert out.visual_clips[1].score == 0.9

    def test_disjoint_unchanged(self):
        pool = EvidencePool(Level.L3, visual_clips=[hit(1)], text_clips=[hit(2)], graph_clips=[hit(3)])
        out = dedup_filter(pool)
        assert (out.visual_clips, out.text_clips, out.graph_clips) == (pool.visual_clips, pool.text_clips,
                                                                       pool.graph_clips)

    def test_duplicate_snippet(self):
        s = SnippetRef("v:1:caption", "v", 1, 30.0, "caption", "t", 0.6)
        out = dedup_filter(EvidencePool(Level.L2, text_snippets=[s, s]))
        assert out.text_snippets == [s]

    def test_idempotent(self):
        rng = random.Random(0)
        for _ in range(100):
            once = dedup_filter(random_pool(rng))
            assert dedup_filter(once) == once


class TestRerank:
    def test_sorted_by_start(self):
        pool = EvidencePool(Level.L2, text_clips=[hit(2), hit(0), hit(1)])
        assert [c.start_s for c in temporal_rerank(pool).text_clips] == [0, 30, 60]

    def test_already_sorted(self):
        pool = EvidencePool(Level.L2, text_clips=[hit(0), hit(1)])
        assert temporal_rerank(pool).text_clips == pool.text_clips

    def test_grouped_by_video(self):
        pool = EvidencePool(Level.L2, visual_clips=[hit(1, vid="b"), hit(0, vid="a"), hit(0, vid="b"), hit(2, vid="a")])
        assert [(c.video_id, c.clip_id) for c in temporal_rerank(pool).visual_clips] == [
            ("a", 0), ("a", 2), ("b", 0), ("b", 1)]

    def test_multiset_preserved(self):
        rng = random.Random(1)
        for _ in range(100):
            pool = random_pool(rng)
            out = temporal_rerank(pool)
            for name in ("visual_clips", "text_clips", "graph_clips", "text_snippets", "graph_snippets"):
                assert Counter(getattr(out, name)) == Counter(getattr(pool, name))


class TestFineFilter:
    def idx(self):
        return text_index([("caption", 0, "a player dribbles"), ("caption", 1, "rain on the window")])

    def test_keep_and_drop(self, gateway):
        pool = EvidencePool(Level.L2, text_clips=[hit(0), hit(1)])
        out = llm_fine_filter(pool, "what did the player do", self.idx(), gateway)
        assert [c.clip_id for c in out.text_clips] == [0]
        assert out.flags["filter_skipped"] is False

    def test_unparseable_keeps(self):
        pool = EvidencePool(Level.L2, text_clips=[hit(0), hit(1)])
        out = llm_fine_filter(pool, "q", self.idx(), Gateway.mock(llm=Garbage("llm")))
        assert [c.clip_id for c in out.text_clips] == [0, 1]

    def test_backend_down(self):
        pool = EvidencePool(Level.L2, text_clips=[hit(0), hit(1)])
        out = llm_fine_filter(pool, "q", self.idx(), Gateway.mock(llm=Down("llm")))
        assert out.text_clips == pool.text_clips and out.flags["filter_skipped"] is True


class TestRetrieve:
    def test_level1_short_circuit(self, gateway, six_clip_index):
        before = six_clip_index.reads
        pool = Retriever(six_clip_index, gateway).retrieve("what is shown?", Level.L1)
        assert pool.is_empty() and six_clip_index.reads == before

    def test_level3_superset_on_fixture(self, gateway, six_clip_index):
        r = Retriever(six_clip_index, gateway, RetrievalConfig(sim_threshold=0.0))
        q = "How did the Number 30 player perform?"
        l2 = r.retrieve(q, Level.L2, fine_filter=False)
        l3 = r.retrieve(q, Level.L3, fine_filter=False)
        assert l3.graph_snippets
        assert l3.clip_keys() >= l2.clip_keys()

    def test_nothing_matches(self, gateway, six_clip_index):
        pool = Retriever(six_clip_index, gateway, RetrievalConfig(sim_threshold=1.0)).retrieve("xyzzy", Level.L2)
        assert pool.is_empty()

    def test_empty_graph_flagged(self, gateway, six_clip_index):
        idx = text_index([("caption", 0, "a b c")])
        idx.graphs["v"] = KnowledgeGraph("v")
        pool = Retriever(idx, gateway, RetrievalConfig(sim_threshold=-1.0)).retrieve("a b", Level.L3)
        assert pool.flags["graph_empty"] is True

    def test_threshold_monotone(self):
        rng = random.Random(2)
        gw = Gateway.mock(dim=16)
        for _ in range(40):
            idx = synthetic_index(rng, dim=16)
            q = random_query(rng)
            lo, hi = sorted(rng.uniform(-1, 1) for _ in range(2))
            for fn in (lambda c: naive_retrieve(rq(q), idx, gw, c)[1],
                       lambda c: visual_ground(q, idx, gw, c)):
                low = fn(RetrievalConfig(sim_threshold=lo, top_k_text=3, top_k_visual=5))
                high = fn(RetrievalConfig(sim_threshold=hi, top_k_text=3, top_k_visual=5))
                assert set(map(repr, high)) <= set(map(repr, low))

    def test_superset_randomized(self):
        rng = random.Random(3)
        gw = Gateway.mock(dim=16)
        for _ in range(20):
            idx = synthetic_index(rng, dim=16)
            idx.graphs["syn"] = build_graph(list(idx.chunks.values()), gw, video_id="syn")
            r = Retriever(idx, gw, loose_config(rng))
            q = random_query(rng)
            assert r.retrieve(q, Level.L3, False).clip_keys() >= r.retrieve(q, Level.L2, False).clip_keys()
