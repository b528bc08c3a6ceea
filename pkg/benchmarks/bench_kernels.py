"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the result does not depend on
STRUCVAR_PURE. Prints one line per (kernel, penalty) with the median time of
each backend and the speedup.
"""
import argparse
import time

import numpy as np

from strucvar import _pykernels
from strucvar.penalties import PenaltySpec, contiguous_groups

try:
    from strucvar import _kernels
except ImportError:
    _kernels = None


def median_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def specs(dim):
    groups = contiguous_groups([5] * (dim // 5))
    return {
        "L1": PenaltySpec.l1(dim),
        "GL": PenaltySpec.group_lasso(groups, dim),
        "SGL": PenaltySpec.sparse_group_lasso(groups, 0.5, dim),
        "OWL": PenaltySpec.owl(np.linspace(1.0, 0.0, dim)),
    }


def problem(dim, n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    beta = np.zeros(dim)
    beta[:4] = 0.5
    y = x @ beta + 0.5 * rng.standard_normal(n)
    G = 2.0 / n * x.T @ x
    c = 2.0 / n * x.T @ y
    return G, c, float(y @ y / n), 1.0 / np.linalg.eigvalsh(G)[-1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--dim", type=int, default=80)
    args = ap.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    dim = args.dim
    v = np.random.default_rng(1).standard_normal(dim)
    G, c, yy, step = problem(dim, 4 * dim)
    print(f"{'kernel':<22}{'python':>12}{'cython':>12}{'speedup':>10}")
    for name, spec in specs(dim).items():
        kargs = spec.kernel_args()
        lam = 0.1 * float(np.max(np.abs(c)))

        def prox_loop(mod):
            return lambda: [mod.prox(v, 0.3, *kargs) for _ in range(1000)]

        def solve(mod):
            return lambda: mod.fista_gram(G, c, yy, np.zeros(dim), lam, *kargs, step, 5000, 1e-8, 0.5, True)

        for label, make in (("prox x1000", prox_loop), ("fista_gram", solve)):
            py = median_time(make(_pykernels), args.repeat)
            cy = median_time(make(_kernels), args.repeat)
            print(f"{label + ' ' + name:<22}{py * 1e3:>10.2f}ms{cy * 1e3:>10.2f}ms{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
