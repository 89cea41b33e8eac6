"""Compare the compiled and pure-Python simplex pivot kernels.

Generates random feasible LPs of growing size, solves each with both
backends, checks the optima agree, and reports wall-clock times.

    python benchmarks/bench_simplex.py [--sizes 20,50,100] [--repeats 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from stladapt import lp
from stladapt import _simplex_py


def random_lp(rng, n: int, m: int):
    """A bounded random LP that is always feasible (x = 0 works)."""
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = np.abs(rng.normal(size=m)) + 1.0  # A x <= b holds at x = 0
    lo = np.full(n, -5.0)
    hi = np.full(n, 5.0)
    return c, A, ["<="] * m, b, lo, hi


def bench(pivot_loop, problems):
    values = []
    start = time.perf_counter()
    for prob in problems:
        res = lp.solve_lp(*prob, pivot_loop=pivot_loop)
        values.append(res.objective if res.status == lp.OPTIMAL else None)
    return time.perf_counter() - start, values


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="20,50,100",
                        help="comma-separated variable counts")
    parser.add_argument("--repeats", type=int, default=5,
                        help="problems per size")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    compiled = getattr(lp._kernel, "pivot_loop", None)
    if compiled is None or lp.BACKEND != "cython":
        print("compiled kernel unavailable; benchmarking pure python only")
    python_loop = _simplex_py._pivot_loop

    rng = np.random.default_rng(args.seed)
    print(f"{'n':>5} {'m':>5} {'python [ms]':>12} {'cython [ms]':>12} "
          f"{'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        m = 2 * n
        problems = [random_lp(rng, n, m) for _ in range(args.repeats)]
        t_py, v_py = bench(python_loop, problems)
        if compiled is None:
            print(f"{n:>5} {m:>5} {1000 * t_py / args.repeats:>12.2f} "
                  f"{'-':>12} {'-':>8}")
            continue
        t_cy, v_cy = bench(compiled, problems)
        for a, b in zip(v_py, v_cy):
            if (a is None) != (b is None):
                raise AssertionError("backends disagree on feasibility")
            if a is not None and abs(a - b) > 1e-6 * max(1.0, abs(a)):
                raise AssertionError(f"objective mismatch: {a} vs {b}")
        print(f"{n:>5} {m:>5} {1000 * t_py / args.repeats:>12.2f} "
              f"{1000 * t_cy / args.repeats:>12.2f} {t_py / t_cy:>8.2f}x")


if __name__ == "__main__":
    main()
