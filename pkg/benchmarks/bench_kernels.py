#!/usr/bin/env python3
"""Benchmark the numba conv kernels against the pure-numpy fallback.

The package picks its backend at import time (numba when importable,
numpy when MULTIRES_NUMBA=0). This script times both paths side by side
in one process: the raw conv forward/backward kernels at a few shapes,
and a full training run on the synthetic clustered benchmark.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from multires.numerics.kernels import (
    NUMBA_ENABLED,
    conv_backward_numpy,
    conv_forward_numpy,
)


def time_fn(fn, *args, repeats=20):
    fn(*args)  # warm-up (and JIT compile on the numba path)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return float(np.mean(times)), float(np.std(times))


def bench_kernels(repeats):
    print("-" * 72)
    print(f"{'shape (B,k,d -> n_k,ws)':<34}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    print("-" * 72)
    shapes = [
        (64, 1, 64, 64, 5),
        (256, 1, 64, 64, 5),
        (32, 16, 64, 64, 5),
        (8, 32, 256, 256, 5),
    ]
    rng = np.random.default_rng(0)
    for batch, k, d, n_k, ws in shapes:
        x = rng.normal(size=(batch, k, d)).astype(np.float32)
        w = rng.normal(size=(n_k, ws, d)).astype(np.float32)
        b = rng.normal(size=n_k).astype(np.float32)
        g = rng.normal(size=(batch, k, n_k)).astype(np.float32)

        fwd_np, _ = time_fn(conv_forward_numpy, x, w, b, repeats=repeats)
        bwd_np, _ = time_fn(conv_backward_numpy, x, w, g, repeats=repeats)
        label = f"({batch},{k},{d} -> {n_k},{ws})"
        if NUMBA_ENABLED:
            from multires.numerics.kernels import conv_backward_jit, conv_forward_jit

            fwd_nb, _ = time_fn(conv_forward_jit, x, w, b, repeats=repeats)
            bwd_nb, _ = time_fn(conv_backward_jit, x, w, g, repeats=repeats)
            print(
                f"{label + ' fwd':<34}{fwd_np * 1e3:>10.3f}ms{fwd_nb * 1e3:>10.3f}ms"
                f"{fwd_np / fwd_nb:>9.2f}x"
            )
            print(
                f"{label + ' bwd':<34}{bwd_np * 1e3:>10.3f}ms{bwd_nb * 1e3:>10.3f}ms"
                f"{bwd_np / bwd_nb:>9.2f}x"
            )
        else:
            print(f"{label + ' fwd':<34}{fwd_np * 1e3:>10.3f}ms{'n/a':>12}")
            print(f"{label + ' bwd':<34}{bwd_np * 1e3:>10.3f}ms{'n/a':>12}")


def bench_training():
    from multires.synthetic import run_clustered_benchmark

    start = time.perf_counter()
    result = run_clustered_benchmark(seed=7)
    elapsed = time.perf_counter() - start
    backend = "numba" if NUMBA_ENABLED else "numpy"
    print("-" * 72)
    print(
        f"synthetic benchmark ({backend} backend): {elapsed:.1f}s, "
        f"recall@1 {result['baseline_recall']['1']:.3f} -> {result['trained_recall']['1']:.3f}"
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    print(f"numba available and enabled: {NUMBA_ENABLED}")
    if not NUMBA_ENABLED:
        print("(set MULTIRES_NUMBA=1 or install numba to compare the jit path)")
    bench_kernels(args.repeats)
    bench_training()


if __name__ == "__main__":
    main()
