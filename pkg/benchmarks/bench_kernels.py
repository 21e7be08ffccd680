"""Benchmark the compiled kernel core against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--size 128] [--repeats 5]
"""

import argparse
import time

import numpy as np


def _best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    from cloudcast._kernels import _numpy as numpy_kernels

    try:
        from cloudcast._kernels import _core as core_kernels
    except ImportError:
        print("compiled core not built; nothing to compare")
        return

    from cloudcast.nowcast import tvl1
    from cloudcast.nowcast.extrapolate import to_intensity
    from cloudcast.verify import SyntheticSpec, Translation, generate_synthetic

    n = args.size
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 255, (n, n)).astype(np.float32)
    u = rng.uniform(-2, 2, (n, n)).astype(np.float32)
    v = rng.uniform(-2, 2, (n, n)).astype(np.float32)
    gy, gx = np.gradient(img.astype(np.float64))
    gx = gx.astype(np.float32)
    gy = gy.astype(np.float32)

    seq, _ = generate_synthetic(SyntheticSpec(
        flow=Translation(2.0, 0.0), grid_size=(n, n), frame_count=2, seed=3))
    i0 = to_intensity(seq[0])
    i1 = to_intensity(seq[1])

    def bench_backend(kernels):
        results = {}
        results["warp_bilinear"] = _best_of(
            lambda: kernels.warp_bilinear(img, u, v), args.repeats)
        results["median_filter r=2"] = _best_of(
            lambda: kernels.median_filter(u, 2), args.repeats)

        moved = np.ascontiguousarray(np.roll(img, 2, axis=1))

        def solve():
            uu = np.zeros((n, n), dtype=np.float32)
            vv = np.zeros((n, n), dtype=np.float32)
            kernels.solve_warp(img, moved, gx, gy, uu, vv, None,
                               0.15, 0.3, 0.25, 1e-9, 0.0, 10, 30)

        results["solve_warp (300 iters)"] = _best_of(solve, args.repeats)

        originals = (tvl1.kernels.warp_bilinear, tvl1.kernels.median_filter,
                     tvl1.kernels.solve_warp)
        tvl1.kernels.warp_bilinear = kernels.warp_bilinear
        tvl1.kernels.median_filter = kernels.median_filter
        tvl1.kernels.solve_warp = kernels.solve_warp
        try:
            results["estimate_flow (default params)"] = _best_of(
                lambda: tvl1.estimate_flow(i0, i1), args.repeats)
        finally:
            (tvl1.kernels.warp_bilinear, tvl1.kernels.median_filter,
             tvl1.kernels.solve_warp) = originals
        return results

    core = bench_backend(core_kernels)
    fallback = bench_backend(numpy_kernels)

    width = max(len(k) for k in core)
    print(f"\nkernel benchmark at {n}x{n} (best of {args.repeats})\n")
    print(f"{'kernel':<{width}}  {'cython':>10}  {'numpy':>10}  {'speedup':>8}")
    for name in core:
        c, f = core[name], fallback[name]
        print(f"{name:<{width}}  {c * 1e3:>8.2f}ms  {f * 1e3:>8.2f}ms  {f / c:>7.1f}x")


if __name__ == "__main__":
    main()
