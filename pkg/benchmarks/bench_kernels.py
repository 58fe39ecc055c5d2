"""Compare the compiled kernels with the numpy/pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py``. Prints median wall time per
call and the speed-up for each kernel at a few problem sizes.
"""

import argparse
import statistics
import time

import numpy as np

from lecfdr import _fallback
from lecfdr.core import max_errors_table

try:
    from lecfdr import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def _time(fn, args, repeat):
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def route_args(n, rng):
    u = rng.random((n, 2))
    err = (rng.random((n, 2)) < 0.1 + 0.5 * u).astype(np.int64)
    ra = np.unique(u[:, 0], return_inverse=True)[1].astype(np.int64)
    rb = np.unique(u[:, 1], return_inverse=True)[1].astype(np.int64)
    return (ra, rb, err[:, 0].copy(), err[:, 1].copy(), n, n, max_errors_table(0.2, n), 0, 0)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="100,500,2000")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<22}{'size':>8}{'cython ms':>12}{'python ms':>12}{'speed-up':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        a = route_args(n, rng)
        assert tuple(_kernels.route_search(*a)) == tuple(_fallback.route_search(*a))
        tc = _time(_kernels.route_search, a, args.repeat)
        tp = _time(_fallback.route_search, a, args.repeat)
        print(f"{'route_search':<22}{n:>8}{tc * 1e3:>12.3f}{tp * 1e3:>12.3f}{tp / tc:>10.1f}")
    cases = [(float(a), float(b), float(x)) for a, b, x in
             zip(rng.integers(1, 500, 2000), rng.integers(1, 500, 2000), rng.random(2000))]

    def batch(f):
        for c in cases:
            f(*c)

    tc = _time(batch, (_kernels.reg_incomplete_beta,), args.repeat)
    tp = _time(batch, (_fallback.reg_incomplete_beta,), args.repeat)
    print(f"{'reg_incomplete_beta':<22}{len(cases):>8}{tc * 1e3:>12.3f}{tp * 1e3:>12.3f}{tp / tc:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
