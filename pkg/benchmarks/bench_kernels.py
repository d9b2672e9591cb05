"""Compiled vs numpy kernels on the workloads the experiments actually run.

    python benchmarks/bench_kernels.py [--n 100] [--draws 2000]
"""

import argparse
import time

import numpy as np

from blindcomm import PlantedPartitionParams, build_planted_partition, lowpass_power_filter, paper_alpha
from blindcomm._kernels import _fallback

try:
    from blindcomm._kernels import _core
except ImportError:
    _core = None


def best_of(fn, repeat=3):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--draws", type=int, default=2000)
    ap.add_argument("--chunk", type=int, default=64)
    ap.add_argument("--points", type=int, default=2000)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    model = build_planted_partition(PlantedPartitionParams.from_gamma(args.n, 0.5))
    pair_prob = model.pair_probabilities()
    coeffs = np.ascontiguousarray(lowpass_power_filter(paper_alpha(args.n, 0.5), 5).coeffs)
    u = rng.random((args.chunk, pair_prob.size))
    w = rng.uniform(-1, 1, (args.chunk, args.n))
    out = np.empty_like(w)
    reps = max(1, args.draws // args.chunk)

    X = rng.standard_normal((args.points, 2))
    C = rng.standard_normal((2, 2))
    labels = np.empty(args.points, dtype=np.int64)
    dist = np.empty(args.points)

    impls = [("python", _fallback)] + ([("cython", _core)] if _core is not None else [])
    print(f"n={args.n}, {reps * args.chunk} graph draws, degree-{len(coeffs) - 1} filter; "
          f"k-means assignment of {args.points} points")
    rows = {}
    for name, mod in impls:
        filt = best_of(lambda: [mod.sbm_filter_batch(u, pair_prob, coeffs, w, out) for _ in range(reps)])
        assign = best_of(lambda: [mod.assign_nearest(X, C, labels, dist) for _ in range(200)])
        rows[name] = (filt, assign)
        print(f"{name:>7}: sbm_filter_batch {filt * 1e6 / (reps * args.chunk):8.1f} us/draw   "
              f"assign_nearest {assign * 1e6 / 200:8.1f} us/call")
    if len(rows) == 2:
        print(f"speedup: filter x{rows['python'][0] / rows['cython'][0]:.1f}, "
              f"assign x{rows['python'][1] / rows['cython'][1]:.1f}")
    else:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
