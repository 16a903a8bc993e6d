"""Hot numeric kernels: cosine scoring and thresholded top-k selection.

Each kernel has a numba ``@njit`` implementation and a pure-numpy fallback.
The numpy path is used when numba is missing or when the environment
variable ``ADAVRAG_DISABLE_NUMBA`` is set to a truthy value.
"""

from __future__ import annotations

import os

import numpy as np

_FALSY = {"", "0", "false", "no", "off"}


def _numba_requested() -> bool:
    return os.environ.get("ADAVRAG_DISABLE_NUMBA", "").strip().lower() in _FALSY


try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _numba_requested()


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------


def cosine_scores_numpy(matrix: np.ndarray, norms: np.ndarray, query: np.ndarray) -> np.ndarray:
    qn = float(np.sqrt(np.dot(query, query)))
    if matrix.shape[0] == 0:
        return np.empty(0, dtype=np.float64)
    dots = matrix @ query
    denom = norms * qn
    out = np.zeros_like(dots)
    np.divide(dots, denom, out=out, where=denom > 0.0)
    return out


def select_topk_numpy(scores: np.ndarray, tie_rank: np.ndarray, k: int, threshold: float) -> np.ndarray:
    idx = np.flatnonzero(scores > threshold)
    if idx.size == 0:
        return idx.astype(np.int64)
    # lexsort: last key is primary
    order = np.lexsort((tie_rank[idx], -scores[idx]))
    return idx[order[:k]].astype(np.int64)


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _cosine_scores_jit(matrix, norms, query):
        n, d = matrix.shape
        qn = 0.0
        for j in range(d):
            qn += query[j] * query[j]
        qn = np.sqrt(qn)
        out = np.zeros(n, dtype=np.float64)
        for i in range(n):
            denom = norms[i] * qn
            if denom <= 0.0:
                continue
            acc = 0.0
            for j in range(d):
                acc += matrix[i, j] * query[j]
            out[i] = acc / denom
        return out

    @njit(cache=True)
    def _select_topk_jit(scores, tie_rank, k, threshold):
        # bounded insertion buffer ordered by (-score, tie_rank)
        buf = np.empty(k, dtype=np.int64)
        filled = 0
        for i in range(scores.shape[0]):
            s = scores[i]
            if not s > threshold:
                continue
            pos = filled
            while pos > 0:
                prev = buf[pos - 1]
                ps = scores[prev]
                if ps > s or (ps == s and tie_rank[prev] < tie_rank[i]):
                    break
                pos -= 1
            if pos >= k:
                continue
            stop = filled if filled < k else k - 1
            for m in range(stop, pos, -1):
                buf[m] = buf[m - 1]
            buf[pos] = i
            if filled < k:
                filled += 1
        return buf[:filled].copy()


# Above this width numpy's BLAS matrix-vector product beats the scalar loop
# (see benchmarks/bench_knn.py), so wide embeddings always take the numpy path.
JIT_COSINE_MAX_DIM = 64


def cosine_scores(matrix: np.ndarray, norms: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Cosine similarity of ``query`` against every row of ``matrix``.

    Rows with zero norm score 0.0.
    """
    if USE_NUMBA and matrix.shape[1] <= JIT_COSINE_MAX_DIM:
        return _cosine_scores_jit(matrix, norms, query)
    return cosine_scores_numpy(matrix, norms, query)


def select_topk(scores: np.ndarray, tie_rank: np.ndarray, k: int, threshold: float) -> np.ndarray:
    """Indices of at most ``k`` scores strictly above ``threshold``.

    Ordered by descending score, ties by ascending ``tie_rank``.
    """
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if USE_NUMBA:
        return _select_topk_jit(scores, tie_rank, int(k), float(threshold))
    return select_topk_numpy(scores, tie_rank, k, threshold)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
