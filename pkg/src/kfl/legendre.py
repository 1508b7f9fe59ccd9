"""Discrete Legendre duality between symplectic and log-coordinate potentials."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import _accel
from .errors import GridTooCoarse, NonConvexInput
from .grid import Grid
from .model import SymplecticPotential, ToricModel, convexity_defect, grid_derivatives


@dataclass(frozen=True, eq=False)
class BoxFunction:
    """Function sampled on a tensor box (no mask): log coordinates or any box."""

    axes: tuple
    values: np.ndarray
    convexified: bool = False

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, self.n)

    def __call__(self, pts) -> np.ndarray:
        """Piecewise multilinear interpolation (n = 1, 2)."""
        from scipy.interpolate import RegularGridInterpolator

        f = RegularGridInterpolator(self.axes, self.values, bounds_error=False, fill_value=None)
        return f(np.atleast_2d(pts))


def box(n: int, lo, hi, N: int) -> tuple:
    lo = np.broadcast_to(np.asarray(lo, float), (n,))
    hi = np.broadcast_to(np.asarray(hi, float), (n,))
    return tuple(np.linspace(lo[k], hi[k], N) for k in range(n))


# ---------------------------------------------------------------------------
def _conjugate(src_axes, src_vals, mask, X):
    """max over source nodes of <x, y> - f(y); returns (values, flat argmax into source box)."""
    n = len(src_axes)
    if n == 1:
        z = src_axes[0]
        if mask is not None:
            idx = np.flatnonzero(mask)
            v, a = _accel.conjugate_1d(z[idx], src_vals[idx], X[:, 0])
            return v, idx[a]
        return _accel.conjugate_1d(z, src_vals, X[:, 0])
    if mask is None:
        mask = np.ones(src_vals.shape, dtype=bool)
    v, a0, a1 = _accel.conjugate_2d(src_axes[0], src_axes[1], src_vals, mask, X)
    return v, np.ravel_multi_index((a0, a1), src_vals.shape)


def _on_box_edge(flat, shape) -> np.ndarray:
    idx = np.unravel_index(flat, shape)
    edge = np.zeros(flat.shape, dtype=bool)
    for k, s in enumerate(shape):
        edge |= (idx[k] == 0) | (idx[k] == s - 1)
    return edge


def legendre_transform(f, direction: str = "to_primal", target=None, strict: bool = False, N: int | None = None):
    """Discrete conjugate f*(x) = max_y <x, y> - f(y).

    ``to_primal`` maps a SymplecticPotential (or a BoxFunction on polytope
    coordinates) to a BoxFunction on a log-coordinate box.  ``to_dual``
    maps a BoxFunction to a SymplecticPotential when ``target`` is a
    ToricModel, or to a BoxFunction when ``target`` is a tuple of axes.
    Non-convex input is convexified first (flagged), or rejected when
    ``strict``.
    """
    if direction not in ("to_primal", "to_dual"):
        raise ValueError("direction must be 'to_primal' or 'to_dual'")
    flagged = False
    if isinstance(f, SymplecticPotential):
        from .model import require_convex

        if direction != "to_primal":
            raise ValueError("a symplectic potential can only be transformed to_primal")
        if not f.is_convex(1e-9 * max(1.0, float(np.max(np.abs(f.u))))):
            if strict:
                raise NonConvexInput("symplectic potential is not convex")
            f = require_convex(f)
        flagged = f.convexified
        g = f.grid
        src_axes, src_vals, mask = g.axes, g.to_box(f.u, 0.0), g.mask
        if target is None:
            # cover the gradient range one collar inside the boundary
            inner = g.ell.min(axis=1) >= g.h
            gr = f.grad_u()[inner]
            R = float(np.max(np.abs(gr))) if gr.size else 1.0
            target = box(g.n, -R, R, N or (2049 if g.n == 1 else 257))
        clip_check = False
    else:
        if not isinstance(f, BoxFunction):
            raise TypeError("expected SymplecticPotential or BoxFunction")
        vals = f.values
        if convexity_defect_box(f) < -1e-9 * max(1.0, float(np.max(np.abs(vals)))):
            if strict:
                raise NonConvexInput("box function is not convex")
            warnings.warn("non-convex input replaced by its convex envelope", stacklevel=2)
            vals = convex_envelope_points(f.points, vals.ravel()).reshape(vals.shape)
            flagged = True
        src_axes, src_vals, mask = f.axes, vals, None
        clip_check = True
        if target is None:
            lo = [np.min(np.gradient(vals, *f.axes)[k] if f.n > 1 else np.gradient(vals, f.axes[0])) for k in range(f.n)]
            hi = [np.max(np.gradient(vals, *f.axes)[k] if f.n > 1 else np.gradient(vals, f.axes[0])) for k in range(f.n)]
            target = box(f.n, lo, hi, N or len(f.axes[0]))

    if isinstance(target, ToricModel):
        model = target
        g = model.grid
        X = g.points
        vals, arg = _conjugate(src_axes, src_vals, mask, X)
        if clip_check:
            inner = g.ell.min(axis=1) >= 2 * g.h
            if np.any(_on_box_edge(arg, src_vals.shape) & inner):
                raise GridTooCoarse("conjugate slopes leave the log-coordinate box; enlarge it")
        out = SymplecticPotential(model, vals - model.uG, convexified=flagged)
        return out
    axes = tuple(np.asarray(a, float) for a in target)
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    vals, arg = _conjugate(src_axes, src_vals, mask, X)
    if clip_check:
        interior = ~_on_box_edge(np.arange(X.shape[0]), tuple(len(a) for a in axes))
        if np.any(_on_box_edge(arg, src_vals.shape) & interior):
            raise GridTooCoarse("conjugate slopes leave the source box; enlarge it or shrink the target")
    return BoxFunction(axes, vals.reshape(tuple(len(a) for a in axes)), convexified=flagged)


def convexity_defect_box(f: BoxFunction) -> float:
    v = f.values
    worst = np.inf
    dirs = [(1,)] if f.n == 1 else [(1, 0), (0, 1), (1, 1), (1, -1)]
    for d in dirs:
        fp, fm = v, v
        for ax, s in enumerate(d):
            if s:
                fp = np.roll(fp, -s, ax)
                fm = np.roll(fm, s, ax)
        sec = (fp + fm - 2 * v)[tuple(slice(1, -1) for _ in range(f.n))]
        if sec.size:
            worst = min(worst, float(sec.min()))
    return worst


# ---------------------------------------------------------------------------
def convex_envelope_points(P: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Largest convex function below the samples (P[k], f[k]), evaluated at P."""
    P = np.asarray(P, float)
    f = np.asarray(f, float)
    if P.ndim == 1 or P.shape[1] == 1:
        z = P.reshape(-1)
        order = np.argsort(z, kind="stable")
        hull = _accel.lower_hull(z[order], f[order])
        zh, fh = z[order][hull], f[order][hull]
        return np.interp(z, zh, fh)
    lifted = np.column_stack([P, f])
    try:
        hull = ConvexHull(lifted, qhull_options="Qt")
    except QhullError:  # all samples coplanar: already affine
        return f.copy()
    eq = hull.equations
    lower = eq[eq[:, 2] < -1e-12]
    # plane a.y + c.z + d = 0 with c < 0: z = -(a.y + d) / c
    A = -lower[:, :2] / lower[:, 2:3]
    B = -lower[:, 3] / lower[:, 2]
    out = f.copy()
    verts = np.zeros(len(f), dtype=bool)
    verts[np.unique(hull.simplices[(eq[:, 2] < -1e-12)].ravel())] = True
    rest = np.flatnonzero(~verts)
    for s in range(0, rest.size, 2048):
        k = rest[s:s + 2048]
        out[k] = np.minimum(f[k], (P[k] @ A.T + B).max(axis=1))
    return out


def convex_envelope(grid: Grid, u: np.ndarray) -> np.ndarray:
    if convexity_defect(grid, u) >= 0:
        return np.asarray(u, float).copy()
    return convex_envelope_points(grid.points, u)


# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class KahlerData:
    """The Kähler potential of ``u`` read off in two ways.

    ``phi_ref`` is phi at the image of each grid node under the reference
    moment map (integrates against the reference measure dy').  ``T`` maps
    each node y to the reference coordinate of the same point of M, and
    ``phi_T`` = phi at that point (integrates against dy for omega_phi^n).
    """

    phi_ref: np.ndarray
    S: np.ndarray
    T: np.ndarray
    phi_T: np.ndarray
    grad_u: np.ndarray
    Y: np.ndarray  # nodes, rim nodes nudged inside so that T is finite
    logL_T: np.ndarray  # log of the facet values at T, accurate where they underflow


def _log_facets(model, T: np.ndarray, X: np.ndarray, small: float = 1e-8) -> np.ndarray:
    """log l_i(T), recovering tiny facet values from X = sum_k l_k (log l_k + 1).

    Once l_i(T) drops below ~1e-16 relative, T itself no longer resolves it;
    the gradient equation still does, given the facets that stay O(1).
    """
    ell = model.poly.ell(T)
    out = np.log(np.maximum(ell, 1e-300))
    tiny = ell < small
    rows = np.flatnonzero(tiny.any(axis=1))
    if rows.size == 0:
        return out
    L = model.L
    patterns, inv = np.unique(tiny[rows], axis=0, return_inverse=True)
    for k, pat in enumerate(patterns):
        r = rows[inv.ravel() == k]
        big = ~pat
        resid = X[r] - (out[r][:, big] + 1.0) @ L[big]
        z, *_ = np.linalg.lstsq(L[pat].T, resid.T, rcond=None)
        out[np.ix_(r, np.flatnonzero(pat))] = z.T - 1.0
    return out


def _refine(pot: SymplecticPotential, X, vals, arg):
    """Sub-cell quadratic correction of the discrete maximum and maximiser."""
    g = pot.grid
    Z = g.points[arg].copy()
    gu = pot.grad_u()[arg]
    Hu = pot.hess_u()[arg]
    ok = g.ell[arg].min(axis=1) >= 2 * g.h
    r = X - gu
    with np.errstate(all="ignore"):
        s = np.linalg.solve(Hu[ok], r[ok][..., None])[..., 0]
    good = np.all(np.abs(s) <= g.h, axis=1) & np.isfinite(s).all(axis=1)
    idx = np.flatnonzero(ok)[good]
    s = s[good]
    vals = vals.copy()
    vals[idx] += 0.5 * np.einsum("qi,qi->q", r[idx], s)
    Z[idx] += s
    return vals, Z


def conjugate_at(pot: SymplecticPotential, X: np.ndarray):
    """psi_u(x) = max_y <x, y> - u(y) and its maximiser, with sub-cell refinement."""
    g = pot.grid
    vals, arg = _conjugate(g.axes, g.to_box(pot.u, 0.0), g.mask, np.atleast_2d(X))
    arg = g.index.ravel()[arg]
    return _refine(pot, np.atleast_2d(X), vals, arg)


def kahler_data(pot: SymplecticPotential) -> KahlerData:
    cache = pot.__dict__.get("_kahler")
    if cache is not None:
        return cache
    model = pot.model
    g = pot.grid
    X = model.gradG
    vals, S = conjugate_at(pot, X)
    phi_ref = vals - np.einsum("qi,qi->q", X, g.points) + model.uG

    # forward map T = (grad u_G)^{-1} o grad u at every node
    grad_u = pot.grad_u()
    y_eff = g.points.copy()
    on_bd = g.ell.min(axis=1) <= 1e-12
    if on_bd.any():
        ctr = g.poly.barycenter
        y_eff[on_bd] += 1e-9 * (ctr - y_eff[on_bd])
        grad_u = grad_u.copy()
        grad_u[on_bd] = model.grad_ref(y_eff[on_bd]) + pot.derivatives[0][on_bd]
    T, _ = _accel.inverse_reference_gradient(model.L, model.c, grad_u, y_eff)
    u_eff = model.u_ref(y_eff) + pot.values
    phi_T = np.einsum("qi,qi->q", grad_u, y_eff - T) - u_eff + model.u_ref(T)
    kd = KahlerData(phi_ref, S, T, phi_T, grad_u, y_eff, _log_facets(model, T, grad_u))
    pot.__dict__["_kahler"] = kd
    return kd


def dual_rooftop_check(u: SymplecticPotential, v: SymplecticPotential, R: float = 6.0, N: int = 129, collar: int = 4) -> float:
    """Max node error between max(u, v) and the conjugate of the convex
    envelope of min(psi_u, psi_v), over nodes at least ``collar`` cells
    inside P whose slopes fit the log box [-R, R]^n."""
    u.check_same(v)
    axes = box(u.model.n, -R, R, N)
    pu = legendre_transform(u, "to_primal", target=axes)
    pv = legendre_transform(v, "to_primal", target=axes)
    mn = np.minimum(pu.values, pv.values)
    env = convex_envelope_points(pu.points, mn.ravel()).reshape(mn.shape)
    back, arg = _conjugate(axes, env, None, u.grid.points)
    rt = np.maximum(u.u, v.u)
    g = u.grid
    ok = (g.ell.min(axis=1) >= collar * g.h) & ~_on_box_edge(arg, env.shape)
    return float(np.max(np.abs(back - rt)[ok])) if ok.any() else float("nan")
