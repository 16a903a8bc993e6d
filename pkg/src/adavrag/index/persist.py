"""On-disk index layout.

::

    <root>/manifest.json            version, dims, counts, config echo, sha256 per file
    <root>/chunks.jsonl             one TextChunk per line
    <root>/vision.jsonl             one VisionEntry per line
    <root>/clips.jsonl              one ClipRecord per line
    <root>/graph/entities.jsonl     entities with video_id and description embedding
    <root>/graph/relations.jsonl    relations with video_id and description embedding

Embeddings are written as JSON number arrays; Python's float repr round-trips
float64 exactly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..errors import CorruptIndex, VersionMismatch
from ..media import ClipRecord
from .graph import Entity, KnowledgeGraph, Relation
from .store import OmniIndex, TextChunk, VisionEntry

FORMAT_VERSION = 1

FILES = ("chunks.jsonl", "vision.jsonl", "clips.jsonl", "graph/entities.jsonl", "graph/relations.jsonl")


def _dump_lines(rows: Iterable[dict[str, Any]]) -> bytes:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in rows).encode()


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_index(index: OmniIndex, root: str | Path) -> Path:
    root = Path(root)
    (root / "graph").mkdir(parents=True, exist_ok=True)

    ent_rows, rel_rows = [], []
    for vid in sorted(index.graphs):
        g = index.graphs[vid]
        for eid in sorted(g.entities):
            row = g.entities[eid].to_dict()
            row.update(video_id=vid, embedding=g.entity_vectors.vector(eid).tolist() if eid in g.entity_vectors else None)
            ent_rows.append(row)
        for rid in sorted(g.relations):
            row = g.relations[rid].to_dict()
            row.update(video_id=vid,
                       embedding=g.relation_vectors.vector(rid).tolist() if rid in g.relation_vectors else None)
            rel_rows.append(row)

    blobs = {
        "chunks.jsonl": _dump_lines(index.chunks[k].to_dict() for k in sorted(index.chunks)),
        "vision.jsonl": _dump_lines(index.vision_entries[k].to_dict() for k in sorted(index.vision_entries)),
        "clips.jsonl": _dump_lines(c.to_dict() for c in index.all_clips()),
        "graph/entities.jsonl": _dump_lines(ent_rows),
        "graph/relations.jsonl": _dump_lines(rel_rows),
    }
    for name, data in blobs.items():
        (root / name).write_bytes(data)

    manifest = {
        "version": FORMAT_VERSION,
        "dims": {"text": index.text_dim, "vision": index.vision_dim},
        "frames_per_clip": index.frames_per_clip,
        "counts": index.counts(),
        "config": index.config,
        "graphs": {
            vid: {"dim": g.dim, "skipped_chunks": list(g.skipped_chunks)} for vid, g in sorted(index.graphs.items())
        },
        "checksums": {name: _sha256(data) for name, data in blobs.items()},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return root


def _load_lines(root: Path, name: str, checksum: str | None) -> list[dict[str, Any]]:
    path = root / name
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise CorruptIndex(f"{name} is missing") from None
    if checksum is None or _sha256(data) != checksum:
        raise CorruptIndex(f"{name} failed checksum verification")
    try:
        return [json.loads(line) for line in data.decode().splitlines() if line.strip()]
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptIndex(f"{name} does not parse: {exc}") from exc


def load_index(root: str | Path, freeze: bool = True) -> OmniIndex:
    root = Path(root)
    mpath = root / "manifest.json"
    if not mpath.is_file():
        raise CorruptIndex(f"{root} has no manifest.json")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise CorruptIndex(f"manifest.json does not parse: {exc}") from exc
    if manifest.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"index format version {manifest.get('version')!r}, expected {FORMAT_VERSION}")
    sums = manifest.get("checksums", {})
    rows = {name: _load_lines(root, name, sums.get(name)) for name in FILES}

    try:
        index = OmniIndex(
            int(manifest["dims"]["text"]),
            int(manifest["dims"]["vision"]),
            frames_per_clip=int(manifest.get("frames_per_clip", 5)),
            config=manifest.get("config", {}),
        )
        for r in rows["clips.jsonl"]:
            index.add_clip(ClipRecord.from_dict(r))
        for r in rows["chunks.jsonl"]:
            index.add_chunk(TextChunk.from_dict(r))
        for r in rows["vision.jsonl"]:
            index.add_vision(VisionEntry.from_dict(r))

        for vid, meta in manifest.get("graphs", {}).items():
            g = KnowledgeGraph(vid, int(meta["dim"]))
            g.skipped_chunks = list(meta.get("skipped_chunks", []))
            index.graphs[vid] = g
        for r in rows["graph/entities.jsonl"]:
            g = index.graphs[r["video_id"]]
            ent = Entity.from_dict(r)
            g.entities[ent.entity_id] = ent
            g.adjacency[ent.entity_id] = set()
            g._by_key[ent.key] = ent.entity_id
            if r.get("embedding") is not None:
                g.entity_vectors.add(ent.entity_id, np.asarray(r["embedding"], dtype=np.float64), r["video_id"])
        for r in rows["graph/relations.jsonl"]:
            g = index.graphs[r["video_id"]]
            rel = Relation.from_dict(r)
            g.relations[rel.relation_id] = rel
            g.adjacency[rel.head_entity_id].add(rel.relation_id)
            g.adjacency[rel.tail_entity_id].add(rel.relation_id)
            g._rel_by_key[(rel.head_entity_id, rel.tail_entity_id, rel.kind)] = rel.relation_id
            if r.get("embedding") is not None:
                g.relation_vectors.add(rel.relation_id, np.asarray(r["embedding"], dtype=np.float64), r["video_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptIndex(f"index content inconsistent: {exc!r}") from exc
    if freeze:
        index.freeze()
    return index
