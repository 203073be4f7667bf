"""Throughput comparison of the compiled and numpy replicator kernels.

Runs both backends on identical random payoff matrices for a fixed number of
iterations (tol=0 disables early exit) and reports wall time per backend,
speedup, and the max final-iterate disagreement.

Usage: python3 benchmarks/bench_replicator.py [--iters 2000] [--repeats 3]
"""

import argparse
import time

import numpy as np

from cdseg import kernels


def random_payoff(n, rng):
    w = rng.random((n, n))
    w = (w + w.T) / 2.0
    np.fill_diagonal(w, 0.0)
    return w


def best_wall_time(run, w, x0, iters, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        run(w, x0, 0.0, iters)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iters", type=int, default=2000)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400, 800])
    args = parser.parse_args()

    if kernels.compiled_run is None:
        print("compiled kernel unavailable; timing the numpy fallback only")
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'n':>6} {'numpy s':>10} {'cython s':>10} {'speedup':>8} {'max |dx|':>10}")

    rng = np.random.default_rng(42)
    for n in args.sizes:
        w = random_payoff(n, rng)
        x0 = np.full(n, 1.0 / n)
        t_np = best_wall_time(kernels.numpy_run, w, x0, args.iters, args.repeats)
        if kernels.compiled_run is None:
            print(f"{n:>6} {t_np:>10.4f} {'-':>10} {'-':>8} {'-':>10}")
            continue
        t_cy = best_wall_time(kernels.compiled_run, w, x0, args.iters, args.repeats)
        x_np, _, _, _ = kernels.numpy_run(w, x0, 0.0, args.iters)
        x_cy, _, _, _ = kernels.compiled_run(w, x0, 0.0, args.iters)
        gap = float(np.max(np.abs(x_np - x_cy)))
        print(f"{n:>6} {t_np:>10.4f} {t_cy:>10.4f} {t_np / t_cy:>8.2f} {gap:>10.2e}")


if __name__ == "__main__":
    main()
