"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from finslerkit import EvenPNorm, LinearPullback, Randers, build_sphere_quadrature, kernels
from finslerkit import sphere as sp


def best_of(fn, repeat):
    fn()  # warm-up (and numba compilation)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    quad = build_sphere_quadrature(3, 256)
    norms = {
        "quartic": EvenPNorm(4, 3),
        "randers": Randers(np.eye(3), [0.3, 0.1, 0.0]),
        "pullback": LinearPullback(EvenPNorm(6, 3), np.eye(3) + 0.3 * rng.standard_normal((3, 3))),
    }
    X = rng.standard_normal((20000, 3))
    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>9}")
    for name, norm in norms.items():
        canon = norm.canonical()
        cases = {
            f"values/{name}": lambda b: kernels.values(canon, X, b),
            f"hessians/{name}": lambda b: kernels.hessians(canon, X, b),
            f"indicatrix_sums/{name}": lambda b: kernels.indicatrix_sums(canon, quad.nodes, quad.weights, b),
        }
        for label, fn in cases.items():
            tn = best_of(lambda: fn("numba"), args.repeat)
            tp = best_of(lambda: fn("numpy"), args.repeat)
            print(f"{label:<28}{1e3 * tn:>12.2f}{1e3 * tp:>12.2f}{tp / tn:>9.1f}")

    chart = sp.SphereChart(2)
    starts = rng.standard_normal((20, 3))
    starts /= np.linalg.norm(starts, axis=1, keepdims=True)
    b = np.array([1.0, 0.0])
    tn = best_of(lambda: sp.v1_flow(starts, b, 30.0, chart, backend="numba"), args.repeat)
    tp = best_of(lambda: sp.v1_flow(starts, b, 30.0, chart, backend="numpy"), max(1, args.repeat // 2))
    print(f"{'v1_flow/20 starts, t=30':<28}{1e3 * tn:>12.2f}{1e3 * tp:>12.2f}{tp / tn:>9.1f}")


if __name__ == "__main__":
    main()
