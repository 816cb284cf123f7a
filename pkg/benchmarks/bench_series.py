#!/usr/bin/env python3
"""Benchmark the compiled series core against the pure-NumPy fallback.

The truncated Gegenbauer series over all pairwise inner products is the hot
loop of kernel-matrix assembly (n^2 evaluations, K recurrence steps each;
the cyclic kernel multiplies that by d). Run:

    python benchmarks/bench_series.py
"""
import time

import numpy as np

from kgflow import BACKEND, build_dot_kernel, relu
from kgflow._kernelcore import series_eval, series_eval_python
from kgflow.kernels import cyclic_kernel_matrix, kernel_matrix, CyclicKernel
from kgflow.data import sample_sphere


def timeit(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    print(f"active backend: {BACKEND}")
    if BACKEND != "compiled":
        print("note: compiled extension not built; comparing fallback to itself")
    rng = np.random.default_rng(0)
    d, K = 100, 30
    spec = build_dot_kernel(relu(), d, K)
    print(f"\nseries evaluation, K={K}, d={d}")
    print(f"{'n values':>12} {'compiled':>12} {'numpy':>12} {'speedup':>9}")
    for size in (100_000, 1_000_000, 4_000_000):
        s = rng.uniform(-1, 1, size)
        tc, out_c = timeit(series_eval, s, spec.level_weights, d)
        tp, out_p = timeit(series_eval_python, s, spec.level_weights, d)
        assert np.allclose(out_c, out_p, rtol=1e-13, atol=1e-15)
        print(f"{size:>12} {tc*1e3:>10.1f}ms {tp*1e3:>10.1f}ms {tp/tc:>8.2f}x")

    print("\nend-to-end kernel matrix assembly (includes the BLAS Gram)")
    for n in (1000, 2000):
        X = sample_sphere(n, d, rng)
        t1, _ = timeit(kernel_matrix, spec, X, repeats=2)
        print(f"  dot kernel    n={n}: {t1*1e3:9.1f}ms")
    dsmall = 50
    spec_c = build_dot_kernel(relu(), dsmall, K)
    Xc = sample_sphere(400, dsmall, rng)
    t2, _ = timeit(cyclic_kernel_matrix, CyclicKernel(spec_c), Xc, repeats=2)
    print(f"  cyclic kernel n=400, d={dsmall}: {t2*1e3:9.1f}ms")


if __name__ == "__main__":
    main()
