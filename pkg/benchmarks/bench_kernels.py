#!/usr/bin/env python3
"""Compare the numba and pure-numpy paths of the pairwise kernels.

Usage:
    python benchmarks/bench_kernels.py [--sizes 90 400 1000] [--repeat 5]

For each size the script times the great-circle distance matrix, the
distance and economic kernels and a full composite ``build_weights`` call on
both backends, checks that the results agree, and prints best-of-``repeat``
wall times.  The first numba call per kernel is timed separately since it
includes compilation.
"""

import argparse
import time

import numpy as np

from spgrowth import _accel
from spgrowth import weights as wm


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n, rng):
    lat, lon = rng.uniform(-60, 60, n), rng.uniform(-180, 180, n)
    z = rng.uniform(1, 10, n)
    D = wm.distance_matrix(lat, lon, backend="numpy")
    return {
        "great_circle": lambda b: _accel.great_circle_matrix(lat, lon, wm.EARTH_RADIUS_KM, backend=b),
        "inverse_square": lambda b: _accel.pairwise_kernel(D, _accel.INVERSE_SQUARE, backend=b),
        "power_difference": lambda b: _accel.pairwise_kernel(z, _accel.POWER_DIFFERENCE, power=-2.5, backend=b),
        "neg_exp_abs": lambda b: _accel.neg_exp_abs_difference(z, backend=b),
        "build_weights": lambda b: wm.build_weights(lat, lon, z, "inverse_square", "ratio_proximity",
                                                    backend=b).entries,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[90, 400, 1000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not importable; only the numpy path can run")
        return 1
    rng = np.random.default_rng(args.seed)

    # compilation cost, measured once on a tiny input
    warm = cases(8, rng)
    print("first-call (compile) times, numba:")
    for name, fn in warm.items():
        t0 = time.perf_counter()
        fn("numba")
        print(f"  {name:<18s} {time.perf_counter() - t0:8.3f} s")

    print(f"\n{'kernel':<18s} {'n':>6s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  max|diff|")
    for n in args.sizes:
        for name, fn in cases(n, rng).items():
            t_np, a = best_of(lambda: fn("numpy"), args.repeat)
            t_nb, b = best_of(lambda: fn("numba"), args.repeat)
            diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1.0)))
            print(f"{name:<18s} {n:6d} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.2f}  {diff:.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
