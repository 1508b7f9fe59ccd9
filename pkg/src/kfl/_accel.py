"""Hot numeric kernels.

Every kernel has a numba implementation and a pure-numpy implementation that
compute the same quantity (identical discrete maximiser / Newton iterate).
The numba path is used when numba imports and ``KFL_NO_NUMBA`` is unset or
``0``; set ``KFL_NO_NUMBA=1`` to force the numpy path.  ``KFL_THREADS`` caps
numba's thread pool.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly by whichever path is live
    import numba
    from numba import njit, prange

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(f):
            return f

        return wrapper

    prange = range


def _flag_disabled() -> bool:
    return os.environ.get("KFL_NO_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = NUMBA_AVAILABLE and not _flag_disabled()

if NUMBA_AVAILABLE and "NUMBA_THREADING_LAYER" not in os.environ:
    # system TBB builds are often too old for numba; try it last
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

if NUMBA_AVAILABLE and os.environ.get("KFL_THREADS"):
    try:
        numba.set_num_threads(max(1, min(int(os.environ["KFL_THREADS"]), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        pass


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# lower convex hull of a 1-D sampled function

def lower_hull_numpy(z, f):
    """Indices of the lower convex hull of points (z[k], f[k]), z increasing."""
    hull = []
    for k in range(len(z)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # drop j when it lies on or above the chord i -> k
            if (f[j] - f[i]) * (z[k] - z[i]) >= (f[k] - f[i]) * (z[j] - z[i]):
                hull.pop()
            else:
                break
        hull.append(k)
    return np.asarray(hull, dtype=np.int64)


@njit(cache=True)
def _lower_hull_nb(z, f, out):
    m = 0
    for k in range(z.shape[0]):
        while m >= 2:
            i = out[m - 2]
            j = out[m - 1]
            if (f[j] - f[i]) * (z[k] - z[i]) >= (f[k] - f[i]) * (z[j] - z[i]):
                m -= 1
            else:
                break
        out[m] = k
        m += 1
    return m


def lower_hull(z, f):
    z = np.ascontiguousarray(z, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.float64)
    if USE_NUMBA:
        out = np.empty(z.shape[0], dtype=np.int64)
        m = _lower_hull_nb(z, f, out)
        return out[:m].copy()
    return lower_hull_numpy(z, f)


# ---------------------------------------------------------------------------
# discrete Legendre transform, 1-D

def conjugate_1d(z, f, x):
    """max_k x*z[k] - f[k] for every query x; returns (values, argmax)."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    hull = lower_hull(z, f)
    zh, fh = z[hull], f[hull]
    if len(hull) == 1:
        idx = np.zeros(x.shape, dtype=np.int64)
    else:
        slopes = np.diff(fh) / np.diff(zh)
        idx = np.searchsorted(slopes, x, side="left")
    return x * zh[idx] - fh[idx], hull[idx]


# ---------------------------------------------------------------------------
# discrete Legendre transform, 2-D (row-wise hull + search)

@njit(cache=True)
def _row_hulls_nb(z1, U, lo, hi, hull_idx, hull_len, slopes):
    n0 = U.shape[0]
    for i in range(n0):
        if hi[i] < lo[i]:
            hull_len[i] = 0
            continue
        m = 0
        for k in range(lo[i], hi[i] + 1):
            while m >= 2:
                a = hull_idx[i, m - 2]
                b = hull_idx[i, m - 1]
                if (U[i, b] - U[i, a]) * (z1[k] - z1[a]) >= (U[i, k] - U[i, a]) * (z1[b] - z1[a]):
                    m -= 1
                else:
                    break
            hull_idx[i, m] = k
            m += 1
        hull_len[i] = m
        for q in range(m - 1):
            a = hull_idx[i, q]
            b = hull_idx[i, q + 1]
            slopes[i, q] = (U[i, b] - U[i, a]) / (z1[b] - z1[a])


@njit(parallel=True, cache=True)
def _conj2_query_nb(z0, z1, U, hull_idx, hull_len, slopes, X, out, arg0, arg1):
    n0 = U.shape[0]
    for q in prange(X.shape[0]):
        x0 = X[q, 0]
        x1 = X[q, 1]
        best = -np.inf
        bi = -1
        bj = -1
        for i in range(n0):
            m = hull_len[i]
            if m == 0:
                continue
            # first hull slope >= x1  (searchsorted side='left')
            lo_ = 0
            hi_ = m - 1
            while lo_ < hi_:
                mid = (lo_ + hi_) // 2
                if slopes[i, mid] < x1:
                    lo_ = mid + 1
                else:
                    hi_ = mid
            j = hull_idx[i, lo_]
            val = x0 * z0[i] + x1 * z1[j] - U[i, j]
            if val > best:
                best = val
                bi = i
                bj = j
        out[q] = best
        arg0[q] = bi
        arg1[q] = bj


def _row_ranges(mask):
    n0 = mask.shape[0]
    lo = np.full(n0, 0, dtype=np.int64)
    hi = np.full(n0, -1, dtype=np.int64)
    for i in range(n0):
        nz = np.flatnonzero(mask[i])
        if nz.size:
            lo[i], hi[i] = nz[0], nz[-1]
    return lo, hi


def conjugate_2d(z0, z1, U, mask, X):
    """max over masked nodes (i,j) of X0*z0[i] + X1*z1[j] - U[i,j].

    ``mask`` rows must be contiguous (true for convex domains).  Returns
    (values, argmax_i, argmax_j).
    """
    z0 = np.ascontiguousarray(z0, dtype=np.float64)
    z1 = np.ascontiguousarray(z1, dtype=np.float64)
    U = np.ascontiguousarray(np.where(mask, U, 0.0), dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64).reshape(-1, 2)
    lo, hi = _row_ranges(mask)
    n0, n1 = U.shape
    if USE_NUMBA:
        hull_idx = np.zeros((n0, n1), dtype=np.int64)
        hull_len = np.zeros(n0, dtype=np.int64)
        slopes = np.zeros((n0, max(n1 - 1, 1)), dtype=np.float64)
        _row_hulls_nb(z1, U, lo, hi, hull_idx, hull_len, slopes)
        out = np.empty(X.shape[0])
        a0 = np.empty(X.shape[0], dtype=np.int64)
        a1 = np.empty(X.shape[0], dtype=np.int64)
        _conj2_query_nb(z0, z1, U, hull_idx, hull_len, slopes, X, out, a0, a1)
        return out, a0, a1
    best = np.full(X.shape[0], -np.inf)
    a0 = np.full(X.shape[0], -1, dtype=np.int64)
    a1 = np.full(X.shape[0], -1, dtype=np.int64)
    for i in range(n0):
        if hi[i] < lo[i]:
            continue
        cols = np.arange(lo[i], hi[i] + 1)
        h = cols[lower_hull_numpy(z1[cols], U[i, cols])]
        if h.size == 1:
            k = np.zeros(X.shape[0], dtype=np.int64)
        else:
            s = np.diff(U[i, h]) / np.diff(z1[h])
            k = np.searchsorted(s, X[:, 1], side="left")
        j = h[k]
        val = X[:, 0] * z0[i] + X[:, 1] * z1[j] - U[i, j]
        better = val > best
        best = np.where(better, val, best)
        a0 = np.where(better, i, a0)
        a1 = np.where(better, j, a1)
    return best, a0, a1


# ---------------------------------------------------------------------------
# inverse of the reference gradient map: solve sum_i l_i (log l_i(y) + 1) = x

@njit(parallel=True, cache=True)
def _inv_grad_nb(L, c, X, Y0, tol, maxit, Y, iters):
    m = L.shape[0]
    n = L.shape[1]
    for q in prange(X.shape[0]):
        y0 = Y0[q, 0]
        y1 = Y0[q, 1] if n == 2 else 0.0
        it = 0
        while it < maxit:
            g0 = -X[q, 0]
            g1 = -X[q, 1] if n == 2 else 0.0
            h00 = 0.0
            h01 = 0.0
            h11 = 0.0
            for k in range(m):
                lk = L[k, 0] * y0 + c[k]
                if n == 2:
                    lk += L[k, 1] * y1
                lg = np.log(lk) + 1.0
                g0 += L[k, 0] * lg
                h00 += L[k, 0] * L[k, 0] / lk
                if n == 2:
                    g1 += L[k, 1] * lg
                    h01 += L[k, 0] * L[k, 1] / lk
                    h11 += L[k, 1] * L[k, 1] / lk
            if n == 2:
                det = h00 * h11 - h01 * h01
                d0 = -(h11 * g0 - h01 * g1) / det
                d1 = -(-h01 * g0 + h00 * g1) / det
                dec = -(g0 * d0 + g1 * d1)
            else:
                d0 = -g0 / h00
                d1 = 0.0
                dec = -g0 * d0
            if dec < tol * tol:
                break
            alpha = 1.0
            # stay strictly inside the polytope
            for _ in range(60):
                ok = True
                for k in range(m):
                    lk = L[k, 0] * (y0 + alpha * d0) + c[k]
                    if n == 2:
                        lk += L[k, 1] * (y1 + alpha * d1)
                    if lk <= 0.0:
                        ok = False
                        break
                if ok:
                    break
                alpha *= 0.5
            y0 += alpha * d0
            y1 += alpha * d1
            it += 1
        Y[q, 0] = y0
        if n == 2:
            Y[q, 1] = y1
        iters[q] = it


def _inv_grad_numpy(L, c, X, Y0, tol, maxit):
    Y = Y0.copy()
    n = L.shape[1]
    active = np.ones(X.shape[0], dtype=bool)
    iters = np.zeros(X.shape[0], dtype=np.int64)
    for _ in range(maxit):
        if not active.any():
            break
        ya = Y[active]
        ell = ya @ L.T + c
        lg = np.log(ell) + 1.0
        g = lg @ L - X[active]
        w = 1.0 / ell
        H = np.einsum("qk,ki,kj->qij", w, L, L)
        d = -np.linalg.solve(H, g[..., None])[..., 0]
        dec = -np.einsum("qi,qi->q", g, d)
        done = dec < tol * tol
        alpha = np.ones(ya.shape[0])
        for _ in range(60):
            bad = ((ya + alpha[:, None] * d) @ L.T + c <= 0.0).any(axis=1)
            if not bad.any():
                break
            alpha = np.where(bad, 0.5 * alpha, alpha)
        step = np.where(done[:, None], 0.0, alpha[:, None] * d)
        idx = np.flatnonzero(active)
        Y[idx] = ya + step
        iters[idx[~done]] += 1
        active[idx[done]] = False
    return Y, iters


def inverse_reference_gradient(L, c, X, Y0, tol=1e-13, maxit=200):
    """Points y with sum_i l_i (log l_i(y) + 1) = x, Newton from ``Y0``."""
    L = np.ascontiguousarray(L, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64).reshape(-1, L.shape[1])
    Y0 = np.ascontiguousarray(Y0, dtype=np.float64).reshape(-1, L.shape[1])
    if USE_NUMBA:
        Y = np.empty_like(Y0)
        iters = np.empty(X.shape[0], dtype=np.int64)
        _inv_grad_nb(L, c, X, Y0, tol, maxit, Y, iters)
        return Y, iters
    return _inv_grad_numpy(L, c, X, Y0, tol, maxit)
