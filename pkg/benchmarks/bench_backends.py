#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallbacks.

Times the two genuinely sequential hot loops (streaming tracker
accumulation and the phase-locked-loop baseline) on the same inputs with
both backends and prints throughput plus speedup. Run from a checkout:

    python benchmarks/bench_backends.py [--samples N]
"""

import argparse
import time

import numpy as np

from tonells._kernels import fallback

try:
    from tonells._kernels import _core
except ImportError:
    _core = None


def bench_tracker(impl, y, setup, repeats=3):
    sin_t, cos_t, j, weights, dpsi = setup
    best = np.inf
    for _ in range(repeats):
        state = np.zeros(4)
        counts = np.zeros(3, dtype=np.int64)
        t0 = time.perf_counter()
        pos = 0
        while pos < y.size:
            consumed, emitted, _ = impl.run_tracker_chunk(
                y[pos:], state, counts, sin_t, cos_t,
                j[0, 0], j[0, 1], j[1, 0], j[1, 1], weights, dpsi,
            )
            pos += consumed
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dpll(impl, y, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        impl.dpll_run(y, 1e-7, 2 * np.pi * 400e3, 8e3, 8e6, 2.0, 1e-4,
                      0.125, np.pi / 4)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=2_000_000)
    args = parser.parse_args()

    fs = 1e7
    rng = np.random.default_rng(0)
    t = np.arange(args.samples) / fs
    y = np.ascontiguousarray(np.sin(2 * np.pi * 320.4e3 * t)
                             + rng.normal(0, 0.05, args.samples))

    omega_r = 2 * np.pi * 320e3
    n = 22
    tau = np.arange(n) / fs
    sin_t = np.sin(omega_r * tau)
    cos_t = np.cos(omega_r * tau)
    gram = np.array([[sin_t @ sin_t, sin_t @ cos_t],
                     [sin_t @ cos_t, cos_t @ cos_t]])
    j = np.linalg.inv(gram)
    tk = np.arange(200) * (n / fs)
    tc = tk - tk.mean()
    weights = tc / (tc @ tc)
    setup = (sin_t, cos_t, j, weights, omega_r * n / fs)

    backends = [("python", fallback)]
    if _core is not None:
        backends.append(("compiled", _core))
    else:
        print("compiled kernels not built; benchmarking the fallback only")

    print(f"{args.samples:,} samples @ {fs:g} Hz\n")
    print(f"{'kernel':<10} {'backend':<10} {'time':>9} {'Msamples/s':>11}")
    results = {}
    for kernel, bench in (("tracker", bench_tracker), ("dpll", bench_dpll)):
        for name, impl in backends:
            dt = (bench(impl, y, setup) if kernel == "tracker"
                  else bench(impl, y))
            results[(kernel, name)] = dt
            print(f"{kernel:<10} {name:<10} {dt:>8.3f}s {args.samples / dt / 1e6:>11.1f}")
    if _core is not None:
        for kernel in ("tracker", "dpll"):
            speedup = results[(kernel, "python")] / results[(kernel, "compiled")]
            print(f"\n{kernel}: compiled is {speedup:.0f}x faster")


if __name__ == "__main__":
    main()
