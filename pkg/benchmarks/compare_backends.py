"""Timing comparison of the compiled stepping core against the python fallback.

Runs the catalog problems over a range of grid sizes with both backends and
prints per-solve wall times and the speedup.  Usage:

    python benchmarks/compare_backends.py [--n-list 1024,4096,16384] [--repeats 3]
"""

import argparse
import statistics
import time

import polyem.backend
from polyem.models import problem_by_name
from polyem.modulus import ModulusSpec
from polyem.paths import sample_fine_increments
from polyem.quadrature import build_weight_table
from polyem.scheme import solve_on_grid

SEED = 20240801


def time_solve(problem, n, increments, weights, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        solve_on_grid(problem, n, increments, weights)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-list", default="1024,4096,16384",
                    help="comma-separated grid sizes")
    ap.add_argument("--repeats", type=int, default=3,
                    help="repeats per measurement (best is reported)")
    args = ap.parse_args()
    n_list = [int(v) for v in args.n_list.split(",")]

    if polyem.backend.active_backend() != "compiled":
        raise SystemExit("compiled extension not available; nothing to compare")
    compiled = polyem.backend._kernels

    spec = ModulusSpec()
    print(f"{'problem':8s} {'n':>7s} {'compiled':>12s} {'python':>12s} {'speedup':>9s}")
    ratios = []
    for name in ("A", "B", "lower"):
        problem = problem_by_name(name, spec)
        for n in n_list:
            bundle = sample_fine_increments(SEED, 0, n, problem.dim)
            weights = build_weight_table(n) if problem.has_singular_part else None
            t_c = time_solve(problem, n, bundle.fine_increments, weights, args.repeats)
            try:
                polyem.backend._kernels = None
                t_p = time_solve(problem, n, bundle.fine_increments, weights, args.repeats)
            finally:
                polyem.backend._kernels = compiled
            ratios.append(t_p / t_c)
            print(f"{name:8s} {n:7d} {t_c * 1e3:10.2f}ms {t_p * 1e3:10.2f}ms "
                  f"{t_p / t_c:8.1f}x")
    print(f"\nmedian speedup: {statistics.median(ratios):.1f}x")


if __name__ == "__main__":
    main()
