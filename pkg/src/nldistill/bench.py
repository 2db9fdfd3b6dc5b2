"""Benchmark the numba kernels against the pure-numpy fallback.

Run as ``python -m nldistill.bench [--n N] [--p NUM/DEN] [--repeat R]``.
Times the delta-table build and the full profile scan on both backends;
results are asserted identical before any timing is printed, so the
benchmark doubles as an agreement check.
"""
from __future__ import annotations

import argparse
import time
from fractions import Fraction

from . import kernels
from .bounds import iso_bound
from .boxes import rational, wedge
from .delta import build_tables, fits_int64


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(p: Fraction, n: int, repeat: int) -> None:
    if not fits_int64(p, n):
        print(f"p={p}, n={n} exceeds the int64 range: only the numpy "
              f"object path applies, nothing to compare")
        return
    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    if len(backends) == 1:
        print("numba not importable; timing the numpy fallback only")

    tables = {b: build_tables(p, n, backend=b) for b in backends}
    if len(backends) == 2:
        assert tables["numba"] == tables["numpy"], "backends disagree on tables"

    eps = 8 * p - 3  # p = (3 + eps)/8 on the isotropic line
    system = wedge(eps, 0) if 0 <= eps <= 1 else None
    if system is not None and len(backends) == 2:
        bounds = {
            b: iso_bound(system, n, tables=tables[b], backend=b).raw_bound
            for b in backends
        }
        assert bounds["numba"] == bounds["numpy"], "backends disagree on bound"

    print(f"p = {p}, n = {n}, repeat = {repeat}")
    print(f"{'stage':<14}{'backend':<10}{'seconds':>10}")
    timings = {}
    for b in backends:
        timings["build", b] = _time(lambda b=b: build_tables(p, n, backend=b),
                                    repeat)
        print(f"{'table build':<14}{b:<10}{timings['build', b]:>10.3f}")
    if system is not None:
        for b in backends:
            timings["scan", b] = _time(
                lambda b=b: iso_bound(system, n, tables=tables[b], backend=b),
                repeat)
            print(f"{'profile scan':<14}{b:<10}{timings['scan', b]:>10.3f}")
    if len(backends) == 2:
        for stage in ("build", "scan"):
            if (stage, "numba") in timings:
                ratio = timings[stage, "numpy"] / timings[stage, "numba"]
                print(f"{stage}: numba is {ratio:.1f}x faster")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        description="compare the numba and numpy kernel backends")
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--p", default="2/5", help="table parameter, e.g. 2/5")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    run(rational(args.p), args.n, args.repeat)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
