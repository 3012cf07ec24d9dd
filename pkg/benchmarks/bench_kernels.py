"""Time the compiled envelope kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--nodes 20000 80000] [--targets 20 128] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from negrefract import _pykernels
from negrefract.optics import MediumPair
from negrefract.refractor import denominators
from negrefract.sphere_geom import SphericalCap, build_grid, fibonacci_cap_points

try:
    from negrefract import _ckernels
except ImportError:
    _ckernels = None


def case(n, l, kappa):
    z = np.array([0.0, 0.0, 1.0])
    grid = build_grid(SphericalCap(z, 0.4), n)
    dirs = fibonacci_cap_points(SphericalCap(z, 0.3), l)
    denom = denominators(grid.nodes, dirs, kappa)
    rng = np.random.default_rng(0)
    b = rng.uniform(0.9, 1.1, l)
    b[0] = 1.0
    return denom, b


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, nargs="+", default=[20000, 80000, 320000])
    ap.add_argument("--targets", type=int, nargs="+", default=[20, 128])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the numpy path is available")
    print(f"{'kernel':<11}{'regime':<8}{'nodes':>8}{'targets':>8}{'numpy ms':>11}{'cython ms':>11}{'speedup':>9}  same")
    for kappa in (-1.5, -0.5):
        maximize = MediumPair.from_kappa(kappa).regime.maximize
        tag = "max" if maximize else "min"
        for n in args.nodes:
            for l in args.targets:
                denom, b = case(n, l, kappa)
                jobs = {
                    "envelope": lambda m: m.envelope(denom, b, maximize, 1e-9),
                    "best_other": lambda m: m.best_other(denom, b, l // 2, maximize),
                }
                for name, job in jobs.items():
                    tp = best_time(lambda: job(_pykernels), args.repeat) * 1e3
                    if _ckernels is None:
                        print(f"{name:<11}{tag:<8}{n:>8}{l:>8}{tp:>11.2f}{'-':>11}{'-':>9}  -")
                        continue
                    tc = best_time(lambda: job(_ckernels), args.repeat) * 1e3
                    a, c = job(_pykernels), job(_ckernels)
                    a = a if isinstance(a, tuple) else (a,)
                    c = c if isinstance(c, tuple) else (c,)
                    same = all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, c))
                    print(f"{name:<11}{tag:<8}{n:>8}{l:>8}{tp:>11.2f}{tc:>11.2f}{tp / tc:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
