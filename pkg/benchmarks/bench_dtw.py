"""Benchmark the hot kernels on both backends (numba vs pure numpy).

Usage:
    python3 benchmarks/bench_dtw.py [--query-frames 50] [--item-frames 500]
                                    [--dims 39] [--seconds 2.0]

The same kernels are selected at runtime by the QBESTD_BACKEND environment
variable; this script calls both explicitly and reports the speedup.
"""

import argparse
import time

import numpy as np

from qbestd import kernels


def time_call(fn, *args, min_seconds: float) -> tuple[float, int]:
    fn(*args)  # warm-up (JIT compile on the numba path)
    reps = 0
    begin = time.perf_counter()
    while time.perf_counter() - begin < min_seconds:
        fn(*args)
        reps += 1
    return (time.perf_counter() - begin) / reps, reps


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--query-frames", type=int, default=50)
    parser.add_argument("--item-frames", type=int, default=500)
    parser.add_argument("--dims", type=int, default=39)
    parser.add_argument("--seconds", type=float, default=2.0)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    q = np.ascontiguousarray(rng.standard_normal((args.query_frames, args.dims)))
    t = np.ascontiguousarray(rng.standard_normal((args.item_frames, args.dims)))
    reference = kernels.get_backend("numpy")
    dist = reference.scaled_distance_matrix(q, t)
    dist = (dist - dist.min()) / (dist.max() - dist.min())
    length = args.query_frames
    starts = np.arange(0, args.item_frames - length + 1, dtype=np.int64)

    print(f"query {args.query_frames} x item {args.item_frames} frames, "
          f"{args.dims} dims, {len(starts)} windows per scan")
    print(f"available backends: {', '.join(kernels.available_backends())}\n")

    rows = []
    for name in kernels.available_backends():
        backend = kernels.get_backend(name)
        dist_time, _ = time_call(
            backend.scaled_distance_matrix, q, t, min_seconds=args.seconds / 2
        )
        dtw_time, _ = time_call(
            backend.window_dtw_costs, dist, length, starts, min_seconds=args.seconds
        )
        per_min = len(starts) / dtw_time * 60.0
        rows.append((name, dist_time, dtw_time, per_min))

    base = {name: dtw for name, _, dtw, _ in rows}["numpy"]
    print(f"{'backend':<8} {'dist matrix':>12} {'window scan':>12} "
          f"{'evals/min/core':>16} {'speedup':>8}")
    for name, dist_time, dtw_time, per_min in rows:
        print(f"{name:<8} {dist_time * 1e3:>10.2f}ms {dtw_time * 1e3:>10.2f}ms "
              f"{per_min:>16,.0f} {base / dtw_time:>7.1f}x")

    costs = {
        name: kernels.get_backend(name).window_dtw_costs(dist, length, starts)
        for name in kernels.available_backends()
    }
    if len(costs) == 2:
        gap = np.abs(costs["numba"] - costs["numpy"]).max()
        print(f"\nmax |numba - numpy| over {len(starts)} windows: {gap:.2e}")


if __name__ == "__main__":
    main()
