"""Compare the compiled and pure-Python Douglas-Rachford kernels.

Usage: python benchmarks/bench_kernels.py [--sizes 64x128,128x256] [--repeats 5]

Each size builds one noiseless sparse instance, then times the full
iteration (``dr_loop``) and single tube projections on both backends from
the same starting point. Outputs agree to the printed max difference.
"""

import argparse
import time

import numpy as np

from ibpdn._kernels import _pure
from ibpdn.numerics import svd
from ibpdn.sensing import make_ensemble
from ibpdn.signals import generate_signal

try:
    from ibpdn._kernels import _core
except ImportError:
    _core = None


def _best_of(fn, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(m, n, repeats, seed=0):
    phi = make_ensemble(m, n, "gaussian", seed).effective
    x, _ = generate_signal(n, max(1, m // 6), "exact_sparse", seed)
    y = phi @ x
    eps = 1e-3
    f = svd(phi)
    v = np.ascontiguousarray(f.vt.T)
    s = f.singular_values
    b = f.u.T @ y
    rho = float(np.linalg.norm(y - f.u @ b))
    target = eps - 1e-13
    free = np.ones(n, dtype=np.uint8)
    u0 = v @ (b / s)
    gamma = float(np.median(np.abs(u0)))
    rows = []
    for name, mod, mask in (("python", _pure, free.astype(bool)), ("cython", _core, free)):
        if mod is None:
            continue
        t_loop, (u, iters, _, _) = _best_of(
            lambda: mod.dr_loop(u0.copy(), v, s, b, rho, eps, target, mask, gamma, 1.0, 20000, 1e-9),
            repeats)
        probe = u0 * 3.0
        t_proj, _ = _best_of(lambda: [mod.project(probe, v, s, b, rho, eps, target) for _ in range(200)],
                             repeats)
        rows.append((name, iters, t_loop, t_proj / 200, u))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="32x64,64x128,128x256")
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()
    if _core is None:
        print("compiled extension not built; timing the Python kernels only")
    print(f"{'size':>10} {'backend':>8} {'iters':>6} {'dr_loop [ms]':>13} {'project [us]':>13} {'speedup':>8}")
    for size in args.sizes.split(","):
        m, n = (int(v) for v in size.split("x"))
        rows = bench(m, n, args.repeats)
        ref = rows[0][2]
        for name, iters, t_loop, t_proj, _ in rows:
            print(f"{size:>10} {name:>8} {iters:>6} {1e3 * t_loop:>13.2f} {1e6 * t_proj:>13.2f} "
                  f"{ref / t_loop:>7.2f}x")
        if len(rows) == 2:
            print(f"{'':>10} max |u_python - u_cython| = {np.max(np.abs(rows[0][4] - rows[1][4])):.2e}")


if __name__ == "__main__":
    main()
