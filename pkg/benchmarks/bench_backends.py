"""Numba vs pure-numpy kernels on drop-sized inputs.

Both implementations are imported directly, so one process times both
regardless of D2DFD_BACKEND. Prints one CSV row per kernel:

    kernel,size,numpy_ms,numba_ms,speedup,max_abs_diff

Usage: python benchmarks/bench_backends.py [--repeat N] [--seed S]
"""

import argparse
import math
import sys
import timeit

import numpy as np

from d2dfd import kernels
from d2dfd._accel import HAVE_NUMBA


def _drop_inputs(rng, n_ue, n_bs, radius=63.0, bs_radius=2900.0):
    def disc(n, r):
        rad = r * np.sqrt(rng.random(n))
        th = 2 * math.pi * rng.random(n)
        return np.column_stack((rad * np.cos(th), rad * np.sin(th)))

    return (disc(n_ue, radius), disc(n_bs, bs_radius), rng.exponential(size=n_ue),
            rng.random(n_ue), rng.random(n_ue), rng.exponential(size=n_ue),
            1e-4, 4.0, 0.5, False, 1)


def _best_ms(fn, repeat):
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    rng = np.random.default_rng(args.seed)
    cases = []

    for n in (1_000, 100_000):
        x = rng.random(n)
        a = rng.uniform(0.1, 5.0, n)
        b = rng.uniform(0.1, 5.0, n)
        cases.append(("betainc", n, lambda x=x, a=a, b=b: kernels.betainc_np(x, a, b),
                      lambda x=x, a=a, b=b: kernels.betainc_nb(x, a, b)))

    for n in (1_000, 100_000):
        r2 = rng.uniform(1.0, 1e4, n)
        h = rng.exponential(size=n)
        cases.append(("power_sum", n, lambda r2=r2, h=h: kernels.power_sum_np(r2, h, 4.0),
                      lambda r2=r2, h=h: kernels.power_sum_nb(r2, h, 4.0)))

    for n_ue in (600, 1_300, 5_000):
        inputs = _drop_inputs(rng, n_ue, 26)
        cases.append(("d2d_drop", n_ue, lambda p=inputs: kernels.d2d_drop_np(*p),
                      lambda p=inputs: kernels.d2d_drop_nb(*p)))

    print("kernel,size,numpy_ms,numba_ms,speedup,max_abs_diff")
    for name, size, f_np, f_nb in cases:
        ref, got = f_np(), f_nb()  # also triggers compilation before timing
        diff = float(np.max(np.abs(np.subtract(np.asarray(ref, float), np.asarray(got, float)))))
        t_np = _best_ms(f_np, args.repeat)
        t_nb = _best_ms(f_nb, args.repeat)
        print(f"{name},{size},{t_np:.4f},{t_nb:.4f},{t_np / t_nb:.1f},{diff:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
