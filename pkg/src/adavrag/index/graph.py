"""Entity/relation knowledge graph built from caption, ASR and OCR chunks."""

from __future__ import annotations

import hashlib
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from ..errors import AdaVRAGError, EmptyGraph, ExtractionParseError, PreconditionError, UnknownSeed
from ..prompts import PromptTemplate, load_template
from ..text import format_ts, normalize_name
from .store import TextChunk, VectorStore

log = logging.getLogger(__name__)

RELATION_KINDS = ("spatio-temporal", "causal", "functional", "other")


def entity_key(name: str, entity_type: str) -> tuple[str, str]:
    return (normalize_name(name), normalize_name(entity_type))


def _short_hash(*parts: str) -> str:
    return hashlib.sha1("\x1f".join(parts).encode()).hexdigest()[:12]


@dataclass
class Entity:
    entity_id: str
    entity_type: str
    name: str
    spatiotemporal: str
    description: str
    source_chunk_ids: set[str] = field(default_factory=set)

    @property
    def key(self) -> tuple[str, str]:
        return entity_key(self.name, self.entity_type)

    def embed_text(self) -> str:
        return f"{self.name} {self.description}".strip()

    def to_dict(self) -> dict[str, Any]:
        return {
            "entity_id": self.entity_id,
            "entity_type": self.entity_type,
            "name": self.name,
            "spatiotemporal": self.spatiotemporal,
            "description": self.description,
            "source_chunk_ids": sorted(self.source_chunk_ids),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Entity":
        return cls(d["entity_id"], d["entity_type"], d["name"], d["spatiotemporal"], d["description"],
                   set(d["source_chunk_ids"]))


@dataclass
class Relation:
    relation_id: str
    head_entity_id: str
    tail_entity_id: str
    kind: str
    description: str
    source_chunk_ids: set[str] = field(default_factory=set)

    def to_dict(self) -> dict[str, Any]:
        return {
            "relation_id": self.relation_id,
            "head_entity_id": self.head_entity_id,
            "tail_entity_id": self.tail_entity_id,
            "kind": self.kind,
            "description": self.description,
            "source_chunk_ids": sorted(self.source_chunk_ids),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Relation":
        return cls(d["relation_id"], d["head_entity_id"], d["tail_entity_id"], d["kind"], d["description"],
                   set(d["source_chunk_ids"]))


@dataclass
class Subgraph:
    entity_ids: set[str]
    relation_ids: set[str]
    source_chunk_ids: set[str]


class KnowledgeGraph:
    def __init__(self, video_id: str = "", dim: int = 8):
        self.video_id = video_id
        self.dim = dim
        self.entities: dict[str, Entity] = {}
        self.relations: dict[str, Relation] = {}
        self.adjacency: dict[str, set[str]] = {}
        self.entity_vectors = VectorStore(dim)
        self.relation_vectors = VectorStore(dim)
        self.skipped_chunks: list[str] = []
        self._by_key: dict[tuple[str, str], str] = {}
        self._rel_by_key: dict[tuple[str, str, str], str] = {}
        self.frozen = False
        self.reads = 0

    def __len__(self) -> int:
        return len(self.entities)

    # -- mutation -----------------------------------------------------------

    def upsert_entity(self, entity_type: str, name: str, attr: str, description: str, chunk_id: str) -> Entity:
        if not name.strip():
            raise ExtractionParseError("entity name is empty")
        key = entity_key(name, entity_type)
        eid = self._by_key.get(key)
        if eid is None:
            eid = f"ent-{_short_hash(*key)}"
            ent = Entity(eid, entity_type.strip(), " ".join(name.split()), attr.strip(), description.strip(), {chunk_id})
            self.entities[eid] = ent
            self.adjacency[eid] = set()
            self._by_key[key] = eid
            return ent
        ent = self.entities[eid]
        ent.source_chunk_ids.add(chunk_id)
        if description.strip() and description.strip() not in ent.description.split(" | "):
            ent.description = f"{ent.description} | {description.strip()}" if ent.description else description.strip()
        if attr.strip() and attr.strip() not in ent.spatiotemporal.split("; "):
            ent.spatiotemporal = f"{ent.spatiotemporal}; {attr.strip()}" if ent.spatiotemporal else attr.strip()
        return ent

    def find_entity(self, name: str, entity_type: str | None = None) -> Entity | None:
        if entity_type is not None:
            eid = self._by_key.get(entity_key(name, entity_type))
            return self.entities.get(eid) if eid else None
        norm = normalize_name(name)
        hits = sorted(eid for (n, _), eid in self._by_key.items() if n == norm)
        return self.entities[hits[0]] if hits else None

    def upsert_relation(self, head: Entity, tail: Entity, kind: str, description: str, chunk_id: str) -> Relation:
        kind = kind.strip().lower() or "other"
        key = (head.entity_id, tail.entity_id, kind)
        rid = self._rel_by_key.get(key)
        if rid is None:
            rid = f"rel-{_short_hash(*key)}"
            rel = Relation(rid, head.entity_id, tail.entity_id, kind, description.strip(), {chunk_id})
            self.relations[rid] = rel
            self._rel_by_key[key] = rid
            self.adjacency[head.entity_id].add(rid)
            self.adjacency[tail.entity_id].add(rid)
            return rel
        rel = self.relations[rid]
        rel.source_chunk_ids.add(chunk_id)
        if description.strip() and description.strip() not in rel.description.split(" | "):
            rel.description = f"{rel.description} | {description.strip()}"
        return rel

    def relation_text(self, rel: Relation) -> str:
        h = self.entities[rel.head_entity_id].name
        t = self.entities[rel.tail_entity_id].name
        return f"{h} {rel.description} {t}"

    def embed_all(self, gateway) -> None:
        """(Re)build the description vector stores from current entities and relations."""
        self.entity_vectors = VectorStore(self.dim)
        self.relation_vectors = VectorStore(self.dim)
        for eid in sorted(self.entities):
            self.entity_vectors.add(eid, gateway.embed_text(self.entities[eid].embed_text()), self.video_id)
        for rid in sorted(self.relations):
            self.relation_vectors.add(rid, gateway.embed_text(self.relation_text(self.relations[rid])), self.video_id)

    def freeze(self) -> None:
        self.entity_vectors.freeze()
        self.relation_vectors.freeze()
        self.frozen = True

    # -- reads --------------------------------------------------------------

    def search_seeds(self, query_vec: np.ndarray, n: int) -> tuple[list[tuple[str, float]], list[tuple[str, float]]]:
        self.reads += 1
        if not self.entities:
            raise EmptyGraph(f"graph for {self.video_id!r} has no entities")
        ents = self.entity_vectors.knn_search(query_vec, n, -1.0) if len(self.entity_vectors) else []
        rels = self.relation_vectors.knn_search(query_vec, n, -1.0) if len(self.relation_vectors) else []
        return ents, rels

    def check_adjacency(self) -> bool:
        for rid, rel in self.relations.items():
            if rid not in self.adjacency.get(rel.head_entity_id, ()) or rid not in self.adjacency.get(
                rel.tail_entity_id, ()
            ):
                return False
        return True


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


def parse_extraction(text: str) -> tuple[list[tuple[str, str, str, str]], list[tuple[str, str, str, str]]]:
    """Parse tab-separated ``ENTITY`` / ``REL`` lines.

    Blank lines are ignored; any other line shape is an error. Returns
    ``(entities, relations)`` as (type, name, attr, desc) and
    (head, tail, kind, desc) tuples.
    """
    ents, rels = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("\t")]
        tag = parts[0].upper()
        if tag == "ENTITY" and len(parts) == 5 and parts[2]:
            ents.append((parts[1], parts[2], parts[3], parts[4]))
        elif tag == "REL" and len(parts) == 5 and parts[1] and parts[2]:
            rels.append((parts[1], parts[2], parts[3], parts[4]))
        else:
            raise ExtractionParseError(f"line {lineno} is not a valid ENTITY/REL record: {raw!r}")
    return ents, rels


def _location(chunk: TextChunk) -> str:
    return f"clip {chunk.clip_id} ({format_ts(chunk.span[0])}-{format_ts(chunk.span[1])})"


def build_graph(
    chunks: Iterable[TextChunk],
    gateway,
    template: PromptTemplate | None = None,
    video_id: str = "",
) -> KnowledgeGraph:
    """Extract entities and relations from every chunk and merge them into one graph.

    Entities merge on (normalized name, type). A chunk whose extraction output
    is still malformed after one retry is skipped and listed in
    ``graph.skipped_chunks``.
    """
    chunks = [c for c in chunks if not c.empty]
    if not chunks:
        raise PreconditionError("build_graph needs at least one non-empty chunk")
    template = template or load_template("entity_extraction")
    dim = gateway.text_dim or chunks[0].embedding.size
    graph = KnowledgeGraph(video_id or chunks[0].video_id, dim)
    for chunk in sorted(chunks, key=lambda c: (c.video_id, c.clip_id, c.chunk_id)):
        prompt = template.render(location=_location(chunk), chunk=chunk.text)
        parsed = None
        for _attempt in range(2):
            try:
                parsed = parse_extraction(gateway.complete_text(prompt))
                break
            except ExtractionParseError as exc:
                log.debug("extraction parse failed for %s: %s", chunk.chunk_id, exc)
        if parsed is None:
            graph.skipped_chunks.append(chunk.chunk_id)
            log.warning("skipping chunk %s: extraction output unparseable", chunk.chunk_id)
            continue
        ents, rels = parsed
        local: dict[str, Entity] = {}
        for etype, name, attr, desc in ents:
            ent = graph.upsert_entity(etype, name, attr, desc, chunk.chunk_id)
            local.setdefault(normalize_name(name), ent)
        for head, tail, kind, desc in rels:
            h = local.get(normalize_name(head)) or graph.find_entity(head)
            t = local.get(normalize_name(tail)) or graph.find_entity(tail)
            # unresolved endpoints become implicit entities so relations stay closed
            if h is None:
                h = graph.upsert_entity("other", head, _location(chunk), "", chunk.chunk_id)
            if t is None:
                t = graph.upsert_entity("other", tail, _location(chunk), "", chunk.chunk_id)
            graph.upsert_relation(h, t, kind, desc, chunk.chunk_id)
    graph.embed_all(gateway)
    return graph


def graph_neighborhood(graph: KnowledgeGraph, seeds: Iterable[str], hops: int) -> Subgraph:
    """Closed subgraph around ``seeds`` (entity or relation ids) within ``hops`` traversals.

    A relation seed contributes both endpoints at distance zero. The result
    holds the reached entities, every relation between two reached entities,
    the seed relations, and the union of their source chunks.
    """
    if hops < 0:
        raise PreconditionError("hops must be >= 0")
    graph.reads += 1
    seeds = set(seeds)
    start: set[str] = set()
    seed_rels: set[str] = set()
    for s in seeds:
        if s in graph.entities:
            start.add(s)
        elif s in graph.relations:
            seed_rels.add(s)
            start.add(graph.relations[s].head_entity_id)
            start.add(graph.relations[s].tail_entity_id)
        else:
            raise UnknownSeed(s)

    dist = {e: 0 for e in start}
    frontier = deque(sorted(start))
    while frontier:
        e = frontier.popleft()
        if dist[e] == hops:
            continue
        for rid in sorted(graph.adjacency[e]):
            rel = graph.relations[rid]
            other = rel.tail_entity_id if rel.head_entity_id == e else rel.head_entity_id
            if other not in dist:
                dist[other] = dist[e] + 1
                frontier.append(other)

    ents = set(dist)
    rels = set(seed_rels)
    for e in ents:
        for rid in graph.adjacency[e]:
            rel = graph.relations[rid]
            if rel.head_entity_id in ents and rel.tail_entity_id in ents:
                rels.add(rid)
    sources: set[str] = set()
    for e in ents:
        sources |= graph.entities[e].source_chunk_ids
    for r in rels:
        sources |= graph.relations[r].source_chunk_ids
    return Subgraph(ents, rels, sources)
