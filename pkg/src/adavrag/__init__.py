"""Adaptive retrieval-augmented question answering over long videos.

Queries are classified into three difficulty levels and answered with no
retrieval, naive text/visual retrieval, or naive plus knowledge-graph
retrieval over a multi-modal clip index.
"""

from .config import EngineConfig, RetrievalConfig, load_config
from .engine import Pipeline, build_index
from .gateway import Gateway
from .levels import Level

__all__ = ["EngineConfig", "Gateway", "Level", "Pipeline", "RetrievalConfig", "build_index", "load_config"]
__version__ = "0.1.0"
