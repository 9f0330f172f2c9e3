"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each hot kernel on certification-sized workloads and prints a
speedup table.  The two backends produce bit-identical outputs (asserted
here too); only throughput differs.

Usage:
    python benchmarks/bench_kernels.py [--paths 2048] [--grid 4097] [--repeat 5]
"""

import argparse
import time

import numpy as np

from fouhit import _kernels as kernels


def best_of(call, impl, repeat):
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        call(impl)
        best = min(best, time.perf_counter() - started)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=2048)
    parser.add_argument("--grid", type=int, default=4097)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    values = rng.standard_normal((args.paths, args.grid))
    values[:, 0] = 0.0
    points = np.linspace(0.0, 1.0, args.grid)
    half_dt = 0.5 * (points[1] - points[0])
    exp_t = np.exp(points)
    exp_neg_t = np.exp(-points)
    pow_t = points ** 1.4
    pow_lag = (np.arange(args.grid) * (points[1] - points[0])) ** 1.4

    try:
        numba_impls = kernels._build_numba_impls()
    except ImportError:
        print("numba is not importable; nothing to compare")
        return
    numpy_impls = kernels.NUMPY_IMPLS

    cases = [
        (
            "fou_transform",
            "fou",
            lambda impl: impl(values, exp_t, exp_neg_t, half_dt, 1.0, np.empty_like(values)),
        ),
        (
            "path_sups",
            "sups",
            lambda impl: impl(values, np.empty(args.paths)),
        ),
        (
            "covariance",
            "cov",
            lambda impl: impl(pow_t, pow_lag, np.empty((args.grid, args.grid))),
        ),
    ]

    print(
        f"workload: {args.paths} paths x {args.grid} grid points "
        f"(best of {args.repeat})"
    )
    print(f"{'kernel':<16} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>9}")
    for name, key, call in cases:
        assert np.array_equal(call(numpy_impls[key]), call(numba_impls[key])), (
            f"{name}: backends disagree"
        )
        t_np = best_of(call, numpy_impls[key], args.repeat)
        t_nb = best_of(call, numba_impls[key], args.repeat)
        print(f"{name:<16} {t_np * 1e3:>12.2f} {t_nb * 1e3:>12.2f} {t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
