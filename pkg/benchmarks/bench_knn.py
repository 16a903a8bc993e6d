"""Compare the numba and pure-numpy cosine k-NN kernels.

Usage::

    python3 benchmarks/bench_knn.py [--dims 8 64 256] [--sizes 1000 10000 100000] [--k 5]

Both paths run in the same process, so the numba functions are called
directly. The ``dispatch`` column times the public entry points, which use the
JIT cosine loop only up to ``JIT_COSINE_MAX_DIM`` and honour
``ADAVRAG_DISABLE_NUMBA``.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from adavrag import _kernels


def bench(n: int, dim: int, k: int, repeat: int) -> dict[str, float]:
    rng = np.random.default_rng(n * 31 + dim)
    matrix = rng.standard_normal((n, dim))
    norms = np.linalg.norm(matrix, axis=1)
    query = rng.standard_normal(dim)
    tie_rank = rng.permutation(n).astype(np.int64)

    def numpy_path():
        s = _kernels.cosine_scores_numpy(matrix, norms, query)
        return _kernels.select_topk_numpy(s, tie_rank, k, 0.0)

    out = {"numpy": min(timeit.repeat(numpy_path, number=1, repeat=repeat))}
    if _kernels.HAS_NUMBA:
        def numba_path():
            s = _kernels._cosine_scores_jit(matrix, norms, query)
            return _kernels._select_topk_jit(s, tie_rank, k, 0.0)

        numba_path()  # compile outside the timed region
        assert numba_path().tolist() == numpy_path().tolist()
        out["numba"] = min(timeit.repeat(numba_path, number=1, repeat=repeat))

    def dispatch_path():
        s = _kernels.cosine_scores(matrix, norms, query)
        return _kernels.select_topk(s, tie_rank, k, 0.0)

    dispatch_path()
    out["dispatch"] = min(timeit.repeat(dispatch_path, number=1, repeat=repeat))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[8, 64, 256])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    print(f"default dispatch: {_kernels.backend_name()}")
    print(f"{'n':>8} {'dim':>5} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'dispatch ms':>12}")
    for dim in args.dims:
        for n in args.sizes:
            t = bench(n, dim, args.k, args.repeat)
            nb = t.get("numba")
            speed = f"{t['numpy'] / nb:7.2f}x" if nb else "     n/a"
            nb_ms = f"{nb * 1e3:10.3f}" if nb else f"{'n/a':>10}"
            print(f"{n:>8} {dim:>5} {t['numpy'] * 1e3:10.3f} {nb_ms} {speed} {t['dispatch'] * 1e3:12.3f}")


if __name__ == "__main__":
    main()
