"""Numba versus pure-numpy timings for the hot kernels and one end-to-end run.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--points 20000]

The end-to-end rows run a small ``expect_sl`` in a subprocess per backend,
selected with ``COMLAB_BACKEND``.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from comlab import kernels

E2E = (
    "import time; from comlab import *; from comlab.rng import RngStream; "
    "h = make_variety('veronese:n=2,m=2'); "
    "expect_sl(h, EnsembleSpec('ginibre-polar', 6), 10, 100, RngStream(0)); "
    "t = time.perf_counter(); "
    "expect_sl(h, EnsembleSpec('ginibre-polar', 6), 200, 1000, RngStream(1)); "
    "print(time.perf_counter() - t)"
)


def best(fn, repeat):
    fn()  # warm-up (jit compile)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_rows(K, repeat):
    gen = np.random.default_rng(0)
    rows = []
    for N, n in ((3, 1), (6, 2)):
        A = gen.standard_normal((K, N)) + 1j * gen.standard_normal((K, N))
        B = gen.standard_normal((K, N, n)) + 1j * gen.standard_normal((K, N, n))
        w = gen.random(K)
        for name, args in (("hessian_batch", (A, B)), ("accumulate_mu", (A, w))):
            t_np = best(lambda: getattr(kernels.numpy_impl, name)(*args), repeat)
            t_nb = best(lambda: getattr(kernels.numba_impl, name)(*args), repeat)
            rows.append((f"{name} K={K} N={N} n={n}", t_np, t_nb))
    steps = 10_050
    incr = gen.standard_normal((steps, 2)) * 0.15
    logu = np.log(gen.random(steps))
    x0 = np.array([0.3, 0.6])
    t_np = best(lambda: kernels.numpy_impl.metropolis_walk(x0, incr, logu, 50, 10_000), repeat)
    t_nb = best(lambda: kernels.numba_impl.metropolis_walk(x0, incr, logu, 50, 10_000), repeat)
    rows.append((f"metropolis_walk steps={steps} N=3", t_np, t_nb))
    return rows


def e2e(backend):
    env = dict(os.environ, COMLAB_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=20_000)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)
    if kernels.numba_impl is None:
        sys.exit("numba is not installed; nothing to compare")
    rows = kernel_rows(args.points, args.repeat)
    if not args.skip_e2e:
        rows.append(("expect_sl veronese(2,2) 200 x 1000", e2e("numpy"), e2e("numba")))
    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'numpy [s]':>10}  {'numba [s]':>10}  {'speedup':>8}")
    for name, t_np, t_nb in rows:
        print(f"{name:<{width}}  {t_np:>10.4f}  {t_nb:>10.4f}  {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
