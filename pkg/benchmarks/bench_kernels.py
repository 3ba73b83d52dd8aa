#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against their pure-numpy twins.

Run:  python benchmarks/bench_kernels.py [--size 200000] [--repeats 20]

The same comparison can be driven through the env flag end to end:
SIMMARK_NUMBA=0 selects the numpy path for the whole package.
"""

import argparse
import time

import numpy as np

from simmark import kernels


def timeit(fn, repeats):
    fn()  # warm-up (includes JIT compilation for the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=200_000)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    sims = rng.uniform(-1, 1, args.size)
    emb = rng.normal(size=(args.size // 20, 16))
    neg = rng.normal(size=args.size // 20)
    pos = rng.normal(loc=0.5, size=args.size // 20)
    sorted_scores = np.sort(rng.normal(size=args.size // 4))

    if not kernels.USING_NUMBA:
        print("numba path unavailable (SIMMARK_NUMBA=0 or numba missing); "
              "benchmarking numpy against itself")

    cases = [
        ("soft_counts", lambda: kernels.soft_counts(sims, 0.68, 0.76, 250.0),
         lambda: kernels.soft_counts_numpy(sims, 0.68, 0.76, 250.0)),
        ("hard_counts", lambda: kernels.hard_counts(sims, 0.68, 0.76),
         lambda: kernels.hard_counts_numpy(sims, 0.68, 0.76)),
        ("consecutive_cosine", lambda: kernels.consecutive_cosine(emb),
         lambda: kernels.consecutive_cosine_numpy(emb)),
        ("consecutive_euclidean", lambda: kernels.consecutive_euclidean(emb),
         lambda: kernels.consecutive_euclidean_numpy(emb)),
        ("rank_auc", lambda: kernels.rank_auc(neg, pos),
         lambda: kernels.rank_auc_numpy(neg, pos)),
        ("beta_sweep", lambda: kernels.beta_sweep_index(sorted_scores, -10000, 20001, 0.001, 0.05),
         lambda: kernels.beta_sweep_index_numpy(sorted_scores, -10000, 20001, 0.001, 0.05)),
    ]

    label = "numba" if kernels.USING_NUMBA else "active"
    print(f"{'kernel':<24}{label + ' (ms)':>14}{'numpy (ms)':>14}{'speedup':>10}")
    for name, active, fallback in cases:
        t_active = timeit(active, args.repeats) * 1e3
        t_numpy = timeit(fallback, args.repeats) * 1e3
        print(f"{name:<24}{t_active:>14.3f}{t_numpy:>14.3f}{t_numpy / t_active:>10.2f}x")


if __name__ == "__main__":
    main()
