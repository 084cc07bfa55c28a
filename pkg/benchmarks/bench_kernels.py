"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 2000]

Prints per-call microseconds for each kernel plus one end-to-end solve.
"""

import argparse
import time
import timeit

import numpy as np

from fcbio import _backend, fc_bio
from fcbio.problems import make_min_norm_problem, synthetic_min_norm


def kernel_cases(n: int, rng):
    y = rng.standard_normal(n)
    gf, gg = rng.standard_normal(n), rng.standard_normal(n)
    c = np.zeros(n)
    w = rng.standard_normal(n)
    return {
        "project_ball": (y * 5, c, 1.0),
        "project_ball_hyperplane": (y * 5, c, 1.0, w, 0.1),
        "gradient_mapping": (y, gf, gg, 0.3, 0.1, 0.0, 2.0, c, 1.0),
        "smooth_chain": (y, 1.0, 1.0),
        "lipschitz_chain": (y, 1.0, 1.0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--dims", type=int, nargs="+", default=[10, 100, 1000])
    args = ap.parse_args()
    if "compiled" not in _backend.available():
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'n':>6}{'python us':>12}{'compiled us':>13}{'speedup':>9}")
    for n in args.dims:
        for name, a in kernel_cases(n, rng).items():
            row = []
            for backend in ("python", "compiled"):
                if backend not in _backend.available():
                    row.append(float("nan"))
                    continue
                fn = getattr(_backend.set_backend(backend), name)
                row.append(timeit.timeit(lambda: fn(*a), number=args.repeat) / args.repeat * 1e6)
            print(f"{name:<26}{n:>6}{row[0]:>12.2f}{row[1]:>13.2f}{row[0] / row[1]:>9.2f}")
    grid = (np.zeros(3), 0.02, 50, 1.0, np.full(3, 0.1), np.ones(3), -np.ones(3), 0.0, 0.0, 2.0)
    times = []
    for backend in ("python", "compiled"):
        if backend in _backend.available():
            fn = getattr(_backend.set_backend(backend), "grid_min_max_quad")
            t0 = time.perf_counter()
            fn(*grid)
            times.append(time.perf_counter() - t0)
    print("grid_min_max_quad 101^3 grid (python, compiled): " + ", ".join(f"{t * 1e3:.1f} ms" for t in times))

    data = synthetic_min_norm(40, 80, 7)
    for backend in _backend.available():
        _backend.set_backend(backend)
        problem = make_min_norm_problem(data, 2.0)
        t0 = time.perf_counter()
        rep = fc_bio(problem, 1e-5, f_nonneg=True, g_lower_bound=0.0)
        print(f"min-norm 40x80 eps=1e-5 [{backend}]: {time.perf_counter() - t0:.2f} s, "
              f"{rep.oracle_calls} oracle calls")


if __name__ == "__main__":
    main()
