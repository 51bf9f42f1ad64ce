"""Compare the compiled pair kernel with the numpy fallback.

Run with ``python benchmarks/bench_pair_kernel.py``.  Prints the median wall
time per call for each backend and the max deviation between them.
"""

import argparse
import timeit

import numpy as np

from focusnls import _pairkernel_py

try:
    from focusnls import _pairkernel
except ImportError:
    _pairkernel = None


def make_case(A, Mx, Mz, B, C, seed=0):
    rng = np.random.default_rng(seed)
    shape = (A, Mx, Mz, B, Mx, Mz, C)
    X = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    W = rng.normal(size=(Mz, Mz, Mx * Mx, Mx * Mx))
    W = 0.5 * (W + W.transpose(1, 0, 3, 2))
    return np.ascontiguousarray(X), np.ascontiguousarray(W)


def bench(fn, X, W, repeat):
    out = np.zeros_like(X)
    times = timeit.repeat(lambda: fn(X, W, out), number=1, repeat=repeat)
    return float(np.median(times))


CASES = {
    # (A, Mx, Mz, B, C): N=2 with L=2 (three x modes) and small z grids
    "N2-Mz16": (1, 3, 16, 1, 1),
    "N2-Mz32": (1, 3, 32, 1, 1),
    "N3-Mz16": (1, 3, 16, 1, 48),
    "batch-Mz32": (8, 3, 32, 1, 96),
}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=7)
    args = p.parse_args()
    print(f"{'case':<12} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8} {'max |diff|':>11}")
    for name, dims in CASES.items():
        X, W = make_case(*dims)
        t_py = bench(_pairkernel_py.apply_pair, X, W, args.repeat)
        if _pairkernel is None:
            print(f"{name:<12} {1e3 * t_py:11.3f} {'n/a':>12}")
            continue
        t_cy = bench(_pairkernel.apply_pair, X, W, args.repeat)
        o1, o2 = np.zeros_like(X), np.zeros_like(X)
        _pairkernel_py.apply_pair(X, W, o1)
        _pairkernel.apply_pair(X, W, o2)
        diff = float(np.max(np.abs(o1 - o2)))
        print(f"{name:<12} {1e3 * t_py:11.3f} {1e3 * t_cy:12.3f} {t_py / t_cy:8.2f} {diff:11.2e}")


if __name__ == "__main__":
    main()
