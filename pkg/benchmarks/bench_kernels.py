"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--batch 500] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from arselect import _kernels_py

try:
    from arselect import _kernels
except ImportError:
    _kernels = None

CELLS = ((60, 7), (120, 10), (200, 14), (500, 22), (1000, 31))


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run pip install -e . --no-build-isolation")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'n':>5} {'K':>3} {'kernel':<12} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n, K in CELLS:
        X = rng.standard_normal((args.batch, n))
        S = _kernels.lagged_gram(X, K)
        for name, f_py, f_cy, arg in (
            ("lagged_gram", _kernels_py.lagged_gram, _kernels.lagged_gram, (X, K)),
            ("nested_fit", _kernels_py.nested_fit, _kernels.nested_fit, (S,)),
        ):
            t_py = _best(lambda: f_py(*arg), args.repeat)
            t_cy = _best(lambda: f_cy(*arg), args.repeat)
            print(f"{n:>5} {K:>3} {name:<12} {1e3 * t_py:>10.2f} {1e3 * t_cy:>10.2f} {t_py / t_cy:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
