"""Omni-knowledge indexes: text bases, vision base and knowledge graph."""

from .graph import Entity, KnowledgeGraph, Relation, Subgraph, build_graph, graph_neighborhood, parse_extraction
from .persist import load_index, save_index
from .store import OmniIndex, TextChunk, VectorStore, VisionEntry

__all__ = [
    "Entity",
    "KnowledgeGraph",
    "OmniIndex",
    "Relation",
    "Subgraph",
    "TextChunk",
    "VectorStore",
    "VisionEntry",
    "build_graph",
    "graph_neighborhood",
    "load_index",
    "parse_extraction",
    "save_index",
]
