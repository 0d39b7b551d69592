"""Time the compiled and numpy reverse-delete kernels on random weight matrices.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from cfmmw import _kernels_py

try:
    from cfmmw import _kernels
except ImportError:
    _kernels = None

SHAPES = [(16, 20, 4), (50, 25, 8), (100, 20, 8), (100, 40, 8)]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the numpy kernel is timed")
    rng = np.random.default_rng(0)
    print(f"{'M':>4} {'K':>4} {'L':>3} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for M, K, L in SHAPES:
        xi = rng.exponential(size=(M, K))
        t_py = min(timeit.repeat(lambda: _kernels_py.reverse_delete(xi, L),
                                 number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{M:>4} {K:>4} {L:>3} {t_py:>10.2f} {'-':>10} {'-':>8}")
            continue
        assert np.array_equal(_kernels.reverse_delete(xi, L), _kernels_py.reverse_delete(xi, L))
        t_c = min(timeit.repeat(lambda: _kernels.reverse_delete(xi, L),
                                number=1, repeat=args.repeat)) * 1e3
        print(f"{M:>4} {K:>4} {L:>3} {t_py:>10.2f} {t_c:>10.3f} {t_py / t_c:>7.0f}x")


if __name__ == "__main__":
    main()
