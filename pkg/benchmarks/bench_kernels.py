"""Time the numba and numpy paths of the hot kernels and check they agree.

    python3 benchmarks/bench_kernels.py --grid 257 --repeat 3

KFL_THREADS caps the numba thread pool.
"""
import argparse
import json
import time

import numpy as np

from kfl import _accel
from kfl.polytope import named


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _cases(N):
    rng = np.random.default_rng(0)
    z = np.linspace(-1.0, 1.0, N * N)
    f = z**4 + 0.3 * z**2 + 1e-3 * rng.normal(size=z.size)
    x = np.linspace(-5.0, 5.0, N * N)

    z0 = z1 = np.linspace(-1.0, 1.0, N)
    Z0, Z1 = np.meshgrid(z0, z1, indexing="ij")
    U = 0.5 * (Z0**2 + Z1**2) + 0.2 * Z0**4
    mask = (Z0 + Z1 <= 1.0) & (Z0 - Z1 <= 1.2)
    X = rng.normal(scale=2.0, size=(N * N, 2))

    poly = named("dP3")
    L, c = poly.normals.astype(float), poly.offsets
    Y0 = np.tile(poly.barycenter, (N * N, 1))
    Xg = rng.normal(scale=3.0, size=(N * N, 2))
    return {
        "lower_hull": lambda: _accel.lower_hull(z, f),
        "conjugate_1d": lambda: _accel.conjugate_1d(z, f, x),
        "conjugate_2d": lambda: _accel.conjugate_2d(z0, z1, U, mask, X),
        # iteration counts may differ by one between paths; compare the points
        "inverse_reference_gradient": lambda: _accel.inverse_reference_gradient(L, c, Xg, Y0)[0],
    }


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.shape != b.shape:
        return np.inf
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=257)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    if not _accel.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed")

    rows = []
    for name, fn in _cases(args.grid).items():
        _accel.USE_NUMBA = True
        fn()  # compile
        t_nb, out_nb = _time(fn, args.repeat)
        _accel.USE_NUMBA = False
        t_np, out_np = _time(fn, args.repeat)
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb,
                     "max_abs_diff": _diff(out_nb, out_np)})
    _accel.USE_NUMBA = not _accel._flag_disabled()

    if args.json:
        print(json.dumps(rows, indent=1))
        return
    print(f"grid {args.grid}, best of {args.repeat}")
    print(f"{'kernel':28s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s} {'max diff':>10s}")
    for r in rows:
        print(f"{r['kernel']:28s} {r['numba_s']:10.4f} {r['numpy_s']:10.4f} {r['speedup']:8.1f} {r['max_abs_diff']:10.2e}")


if __name__ == "__main__":
    main()
