"""Benchmark the compiled pairwise kernels against the NumPy fallback.

Run:  python benchmarks/bench_kernels.py [--sizes 1000,2000,4000,8000]

The simulator picks the compiled backend automatically; this script times
both implementations on the two hot kernels (mean-field drift sum and
infection-rate sum) and prints a table with speedups plus an agreement
check.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from mfsir.backends import _core, numpy_backend  # type: ignore[attr-defined]


def time_call(fn, *args, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(sizes):
    rng = np.random.default_rng(0)
    w = np.ones((3, 3))
    print(f"{'N':>7} {'kernel':>14} {'cython':>10} {'numpy':>10} {'speedup':>8} {'agree':>9}")
    for n in sizes:
        x = rng.standard_normal(n)
        states = (rng.random(n) < 0.1).astype(np.int8)
        out_c = np.zeros(n)
        out_n = np.zeros(n)

        t_c = time_call(_core.drift_sum_1d, x, states, 1, 0.5, 1.0, w, out_c)
        t_n = time_call(numpy_backend.drift_sum_1d, x, states, 1, 0.5, 1.0, w, out_n)
        agree = np.max(np.abs(out_c - out_n))
        print(f"{n:>7} {'drift_sum':>14} {t_c * 1e3:>9.2f}ms {t_n * 1e3:>9.2f}ms "
              f"{t_n / t_c:>7.1f}x {agree:>9.1e}")

        t_c = time_call(_core.infection_load_1d, x, states, 1, 1.0, 1.0, out_c)
        t_n = time_call(numpy_backend.infection_load_1d, x, states, 1, 1.0, 1.0, out_n)
        agree = np.max(np.abs(out_c - out_n))
        print(f"{n:>7} {'infection':>14} {t_c * 1e3:>9.2f}ms {t_n * 1e3:>9.2f}ms "
              f"{t_n / t_c:>7.1f}x {agree:>9.1e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="1000,2000,4000,8000")
    args = ap.parse_args()
    bench([int(s) for s in args.sizes.split(",")])
