#!/usr/bin/env python3
"""Benchmark the grouped min-cosine kernel: compiled extension vs numpy.

Measures the matcher's hot loop on synthetic workloads shaped like real ones
(many codes, a handful of vectors each, a few query vectors). Run:

    python3 benchmarks/bench_matcher.py
"""

from __future__ import annotations

import time

import numpy as np

from kgmill.matcher._kernels import _numpy_group_min_cosine

try:
    from kgmill.matcher import _ckernels
except ImportError:
    _ckernels = None

WORKLOADS = [
    # (codes, vectors per code, query vectors, dimension)
    (1_000, 4, 3, 64),
    (10_000, 4, 3, 64),
    (10_000, 8, 6, 384),
    (50_000, 4, 3, 384),
]

REPEATS = 5


def make_workload(n_codes, per_code, n_queries, d, seed=0):
    rng = np.random.default_rng(seed)
    queries = rng.standard_normal((n_queries, d))
    codes = rng.standard_normal((n_codes * per_code, d))
    offsets = np.arange(0, (n_codes + 1) * per_code, per_code, dtype=np.int64)
    return queries, codes, offsets


def timed(fn, *args):
    best = float("inf")
    for _ in range(REPEATS):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def main() -> None:
    print(f"{'workload':<34} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
    for n_codes, per_code, n_queries, d in WORKLOADS:
        queries, codes, offsets = make_workload(n_codes, per_code, n_queries, d)
        label = f"{n_codes} codes x{per_code} vecs, m={n_queries}, d={d}"

        numpy_time, numpy_out = timed(_numpy_group_min_cosine, queries, codes, offsets)
        if _ckernels is None:
            print(f"{label:<34} {numpy_time * 1e3:>10.2f}ms {'(absent)':>12} {'-':>9}")
            continue
        compiled_time, compiled_out = timed(
            _ckernels.group_min_cosine,
            np.ascontiguousarray(queries), np.ascontiguousarray(codes), offsets,
        )
        assert np.allclose(numpy_out, compiled_out, atol=1e-9), "kernel mismatch"
        speedup = numpy_time / compiled_time
        print(f"{label:<34} {numpy_time * 1e3:>10.2f}ms {compiled_time * 1e3:>10.2f}ms "
              f"{speedup:>8.2f}x")


if __name__ == "__main__":
    main()
