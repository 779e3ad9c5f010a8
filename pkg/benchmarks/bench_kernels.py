"""Compare the numba and numpy paths of the hot kernels.

Run ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each kernel is
called once to trigger compilation, then timed with :mod:`timeit`; both
paths are checked to agree before timing.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from critrace import _kernels as K


def _cases(rng):
    exps = rng.integers(0, 5, size=(15, 4))
    coefs = rng.normal(size=15)
    pts = rng.normal(size=(200_000, 4))
    qa, qb, bab = rng.normal(size=(3, 200_000))
    n = 30_001
    vals = np.exp(1j * np.linspace(0, 40, n))
    ders = 1j * vals
    xq = rng.uniform(0, (n - 1) * 0.004, 500_000)
    return {
        "poly_eval": ((exps, coefs, pts), K.poly_eval_numba, K.poly_eval_numpy),
        "circle_bands": ((qa, qb, bab, 1e-3), K.circle_bands_numba, K.circle_bands_numpy),
        "l1_sphere": ((4, 8), K.l1_sphere_numba, K.l1_sphere_numpy),
        "hermite_eval": ((0.0, 0.004, vals, ders, xq), K.hermite_eval_numba, K.hermite_eval_numpy),
    }


def _agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    if a.dtype.kind == "i":
        return np.array_equal(np.unique(a, axis=0), np.unique(b, axis=0))
    return np.allclose(a, b, rtol=1e-10, atol=1e-10)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        print("numba is not installed; only the numpy path is available")
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':<14}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (a, fast, slow) in cases.items():
        ref = slow(*a)
        if K.HAVE_NUMBA:
            assert _agree(fast(*a), ref), f"{name}: paths disagree"
            t_fast = min(timeit.repeat(lambda: fast(*a), number=1, repeat=args.repeat)) * 1e3
        else:
            t_fast = float("nan")
        t_slow = min(timeit.repeat(lambda: slow(*a), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<14}{t_fast:>12.2f}{t_slow:>12.2f}{t_slow / t_fast:>10.1f}")


if __name__ == "__main__":
    main()
