"""Vector bases for caption, ASR, OCR and vision evidence, with exact k-NN."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .. import _kernels
from ..errors import DimensionMismatch, DuplicateChunkId, IndexFrozen, PreconditionError
from ..media import ClipRecord

TEXT_MODALITIES = ("caption", "asr", "ocr")


@dataclass
class TextChunk:
    chunk_id: str
    video_id: str
    clip_id: int
    modality: str
    text: str
    embedding: np.ndarray | None
    span: tuple[float, float]

    def __post_init__(self) -> None:
        if self.modality not in TEXT_MODALITIES:
            raise PreconditionError(f"unknown modality {self.modality!r}")

    @property
    def empty(self) -> bool:
        return not self.text

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunk_id": self.chunk_id,
            "video_id": self.video_id,
            "clip_id": self.clip_id,
            "modality": self.modality,
            "text": self.text,
            "embedding": None if self.embedding is None else self.embedding.tolist(),
            "span": list(self.span),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TextChunk":
        emb = d.get("embedding")
        return cls(
            chunk_id=d["chunk_id"],
            video_id=d["video_id"],
            clip_id=int(d["clip_id"]),
            modality=d["modality"],
            text=d["text"],
            embedding=None if emb is None else np.asarray(emb, dtype=np.float64),
            span=(float(d["span"][0]), float(d["span"][1])),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TextChunk):
            return NotImplemented
        same_emb = (self.embedding is None and other.embedding is None) or (
            self.embedding is not None
            and other.embedding is not None
            and np.array_equal(self.embedding, other.embedding)
        )
        return same_emb and self.to_dict() | {"embedding": None} == other.to_dict() | {"embedding": None}


@dataclass
class VisionEntry:
    video_id: str
    clip_id: int
    embedding: np.ndarray

    @property
    def entry_id(self) -> str:
        return f"{self.video_id}:{self.clip_id}:vision"

    def to_dict(self) -> dict[str, Any]:
        return {"video_id": self.video_id, "clip_id": self.clip_id, "embedding": self.embedding.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "VisionEntry":
        return cls(d["video_id"], int(d["clip_id"]), np.asarray(d["embedding"], dtype=np.float64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VisionEntry):
            return NotImplemented
        return (self.video_id, self.clip_id) == (other.video_id, other.clip_id) and np.array_equal(
            self.embedding, other.embedding
        )


class VectorStore:
    """Exact cosine k-NN over a dense matrix.

    Mutable until :meth:`freeze`; afterwards read-only and safe for
    concurrent searches. ``reads`` counts searches for instrumentation.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise PreconditionError("dim must be positive")
        self.dim = dim
        self._ids: list[str] = []
        self._keys: list[tuple[str, int, str]] = []
        self._rows: list[np.ndarray] = []
        self._pos: dict[str, int] = {}
        self._matrix = np.zeros((0, dim))
        self._norms = np.zeros(0)
        self._tie_rank = np.zeros(0, dtype=np.int64)
        self._dirty = False
        self.frozen = False
        self.reads = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._pos

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def add(self, item_id: str, vector: np.ndarray, video_id: str = "", clip_id: int = 0) -> None:
        if self.frozen:
            raise IndexFrozen("store is frozen")
        vec = np.asarray(vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size != self.dim:
            raise DimensionMismatch(self.dim, vec.size)
        if item_id in self._pos:
            raise DuplicateChunkId(item_id)
        self._pos[item_id] = len(self._ids)
        self._ids.append(item_id)
        self._keys.append((video_id, clip_id, item_id))
        self._rows.append(vec)
        self._dirty = True

    def vector(self, item_id: str) -> np.ndarray:
        return self._rows[self._pos[item_id]]

    def _rebuild(self) -> None:
        if self._rows:
            self._matrix = np.ascontiguousarray(np.vstack(self._rows))
        else:
            self._matrix = np.zeros((0, self.dim))
        self._norms = np.sqrt(np.einsum("ij,ij->i", self._matrix, self._matrix))
        order = sorted(range(len(self._keys)), key=self._keys.__getitem__)
        rank = np.empty(len(order), dtype=np.int64)
        rank[order] = np.arange(len(order))
        self._tie_rank = rank
        self._dirty = False

    def freeze(self) -> None:
        self._rebuild()
        self.frozen = True

    def scores(self, query: np.ndarray) -> np.ndarray:
        """Cosine of ``query`` against every stored vector, in insertion order."""
        q = np.asarray(query, dtype=np.float64)
        if q.ndim != 1 or q.size != self.dim:
            raise DimensionMismatch(self.dim, q.size)
        if self._dirty:
            with self._lock:
                if self._dirty:
                    self._rebuild()
        self.reads += 1
        return _kernels.cosine_scores(self._matrix, self._norms, q)

    def knn_search(self, query: np.ndarray, k: int, threshold: float = -1.0) -> list[tuple[str, float]]:
        """At most ``k`` items scoring strictly above ``threshold``.

        Sorted by descending cosine; ties by ascending (video_id, clip_id, item_id).
        A threshold of -1 still excludes exact -1 scores.
        """
        if k < 1:
            raise PreconditionError("k must be >= 1")
        if not -1.0 <= threshold <= 1.0:
            raise PreconditionError("threshold must lie in [-1, 1]")
        s = self.scores(query)
        idx = _kernels.select_topk(s, self._tie_rank, k, threshold)
        return [(self._ids[i], float(s[i])) for i in idx]


class OmniIndex:
    """Caption, ASR and OCR text bases, the vision base, clips and per-video graphs."""

    def __init__(self, text_dim: int, vision_dim: int, frames_per_clip: int = 5, config: dict | None = None):
        self.text_dim = text_dim
        self.vision_dim = vision_dim
        self.frames_per_clip = frames_per_clip
        self.config: dict[str, Any] = dict(config or {})
        self.bases: dict[str, VectorStore] = {m: VectorStore(text_dim) for m in TEXT_MODALITIES}
        self.vision = VectorStore(vision_dim)
        self.chunks: dict[str, TextChunk] = {}
        self.vision_entries: dict[str, VisionEntry] = {}
        self.clips: dict[tuple[str, int], ClipRecord] = {}
        self.graphs: dict[str, Any] = {}
        self.frozen = False
        self._chunk_reads = 0

    @property
    def reads(self) -> int:
        """Total index reads: vector searches, chunk lookups and graph accesses."""
        graph_reads = sum(g.reads for g in self.graphs.values())
        return (
            sum(b.reads for b in self.bases.values())
            + self.vision.reads
            + self._chunk_reads
            + graph_reads
        )

    @property
    def video_ids(self) -> list[str]:
        return sorted({v for v, _ in self.clips})

    def add_clip(self, clip: ClipRecord) -> None:
        if self.frozen:
            raise IndexFrozen("index is frozen")
        self.clips[clip.key] = clip

    def all_clips(self, video_id: str | None = None) -> list[ClipRecord]:
        return [c for k, c in sorted(self.clips.items()) if video_id is None or k[0] == video_id]

    def clip(self, video_id: str, clip_id: int) -> ClipRecord:
        return self.clips[(video_id, clip_id)]

    def add_chunk(self, chunk: TextChunk) -> None:
        """Store ``chunk`` in the base matching its modality (empty chunks are kept unindexed)."""
        if self.frozen:
            raise IndexFrozen("index is frozen")
        if chunk.chunk_id in self.chunks:
            raise DuplicateChunkId(chunk.chunk_id)
        if chunk.embedding is not None:
            if chunk.embedding.size != self.text_dim:
                raise DimensionMismatch(self.text_dim, chunk.embedding.size)
            self.bases[chunk.modality].add(chunk.chunk_id, chunk.embedding, chunk.video_id, chunk.clip_id)
        elif not chunk.empty:
            raise PreconditionError(f"non-empty chunk {chunk.chunk_id} has no embedding")
        self.chunks[chunk.chunk_id] = chunk

    def get_chunk(self, chunk_id: str) -> TextChunk:
        self._chunk_reads += 1
        return self.chunks[chunk_id]

    def chunks_for_clip(self, video_id: str, clip_id: int) -> list[TextChunk]:
        self._chunk_reads += 1
        return [c for c in self.chunks.values() if c.video_id == video_id and c.clip_id == clip_id]

    def add_vision(self, entry: VisionEntry) -> None:
        if self.frozen:
            raise IndexFrozen("index is frozen")
        if entry.embedding.size != self.vision_dim:
            raise DimensionMismatch(self.vision_dim, entry.embedding.size)
        self.vision.add(entry.entry_id, entry.embedding, entry.video_id, entry.clip_id)
        self.vision_entries[entry.entry_id] = entry

    def knn_search(self, modality: str, query: np.ndarray, k: int, threshold: float) -> list[tuple[str, float]]:
        store = self.vision if modality == "vision" else self.bases[modality]
        return store.knn_search(query, k, threshold)

    def freeze(self) -> None:
        for b in self.bases.values():
            b.freeze()
        self.vision.freeze()
        for g in self.graphs.values():
            g.freeze()
        self.frozen = True

    def reset_reads(self) -> None:
        for b in self.bases.values():
            b.reads = 0
        self.vision.reads = 0
        self._chunk_reads = 0
        for g in self.graphs.values():
            g.reads = 0

    def counts(self) -> dict[str, int]:
        out = {"clips": len(self.clips)}
        for m in TEXT_MODALITIES:
            out[f"chunks_{m}"] = len(self.bases[m])
        out["vision"] = len(self.vision)
        out["entities"] = sum(len(g.entities) for g in self.graphs.values())
        out["relations"] = sum(len(g.relations) for g in self.graphs.values())
        return out


def iter_nonempty(chunks: Iterable[TextChunk]) -> list[TextChunk]:
    return [c for c in chunks if not c.empty]
