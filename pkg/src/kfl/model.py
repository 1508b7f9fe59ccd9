"""Toric models, symplectic potentials and affine functions.

A symplectic potential is stored as its deviation ``w = u - u_G`` from the
reference potential ``u_G(y) = sum_i l_i(y) log l_i(y)`` on the inside nodes
of a grid.  The log singularities of ``u_G`` at the boundary are never
stored; they enter only through the analytic reference data below.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridMismatch, NonConvexInput
from .grid import Grid, grid_for
from .polytope import Polytope, build_polytope, named

_ELL_FLOOR = 1e-300


def _xlogx(x):
    return np.where(x > 0, x * np.log(np.maximum(x, _ELL_FLOOR)), 0.0)


class ToricModel:
    """Polytope + grid + reference data fixing every normalisation.

    The volume convention is V = Vol(P): all normalised integrals are
    Lebesgue means over the polytope.
    """

    def __init__(self, poly: Polytope, N: int | None = None):
        self.poly = poly
        if N is None:
            N = 65537 if poly.n == 1 else 513
        self.grid: Grid = grid_for(poly, N)
        self.V = poly.volume

    def __repr__(self) -> str:
        return f"<ToricModel {self.poly.name or 'P'} N={self.grid.N} nodes={self.grid.size}>"

    @classmethod
    def named(cls, name: str, N: int | None = None) -> "ToricModel":
        return cls(named(name), N)

    def with_grid(self, N: int) -> "ToricModel":
        return ToricModel(self.poly, N)

    @property
    def n(self) -> int:
        return self.poly.n

    @property
    def fano_flag(self) -> bool:
        return self.poly.is_fano

    @property
    def L(self) -> np.ndarray:
        return self.poly.normals.astype(float)

    @property
    def c(self) -> np.ndarray:
        return self.poly.offsets

    # -- reference potential, analytic -------------------------------------
    def u_ref(self, y: np.ndarray) -> np.ndarray:
        return _xlogx(np.maximum(self.poly.ell(y), 0.0)).sum(axis=-1)

    def grad_ref(self, y: np.ndarray) -> np.ndarray:
        ell = np.maximum(self.poly.ell(y), _ELL_FLOOR)
        return (np.log(ell) + 1.0) @ self.L

    def hess_ref(self, y: np.ndarray) -> np.ndarray:
        ell = np.maximum(self.poly.ell(y), _ELL_FLOOR)
        return np.einsum("...k,ki,kj->...ij", 1.0 / ell, self.L, self.L)

    def _poly_parts(self, y):
        """A = sum_i l_i l_i^T prod_{k != i} l_k and Q = det(D^2 u_G) prod l_k,
        both polynomial and finite up to the boundary."""
        ell = np.maximum(self.poly.ell(y), 0.0)
        L = self.L
        m = L.shape[0]
        others = [np.prod(np.delete(ell, i, axis=-1), axis=-1) for i in range(m)]
        A = sum(o[..., None, None] * np.outer(L[i], L[i]) for i, o in enumerate(others))
        if self.n == 1:
            Q = A[..., 0, 0]
        else:
            Q = np.zeros(ell.shape[:-1])
            for i in range(m):
                for j in range(i + 1, m):
                    d = L[i, 0] * L[j, 1] - L[i, 1] * L[j, 0]
                    if d:
                        Q = Q + d * d * np.prod(np.delete(ell, [i, j], axis=-1), axis=-1)
        return A, Q, ell

    def log_q(self, y: np.ndarray) -> np.ndarray:
        return np.log(self._poly_parts(y)[1])

    def logdet_hess_ref(self, y: np.ndarray) -> np.ndarray:
        _, Q, ell = self._poly_parts(y)
        return np.log(Q) - np.log(np.maximum(ell, _ELL_FLOOR)).sum(axis=-1)

    def inv_hess_ref(self, y: np.ndarray) -> np.ndarray:
        """(D^2 u_G)^-1, finite and exact on the boundary."""
        A, Q, ell = self._poly_parts(y)
        if self.n == 1:
            return (np.prod(ell, axis=-1) / Q)[..., None, None]
        adj = np.empty_like(A)
        adj[..., 0, 0] = A[..., 1, 1]
        adj[..., 1, 1] = A[..., 0, 0]
        adj[..., 0, 1] = adj[..., 1, 0] = -A[..., 0, 1]
        return adj / Q[..., None, None]

    # -- reference data on the grid ---------------------------------------
    @cached_property
    def uG(self) -> np.ndarray:
        return self.u_ref(self.grid.points)

    @cached_property
    def gradG(self) -> np.ndarray:
        return self.grad_ref(self.grid.points)

    @cached_property
    def hessG(self) -> np.ndarray:
        return self.hess_ref(self.grid.points)

    def integrate(self, values: np.ndarray) -> float:
        return self.grid.integrate(values)

    def mean(self, values: np.ndarray) -> float:
        return self.grid.integrate(values) / self.V

    def zero(self) -> "SymplecticPotential":
        return SymplecticPotential(self, np.zeros(self.grid.size), normalized=True)

    def potential(self, fn, normalize: bool = False) -> "SymplecticPotential":
        """Potential whose deviation is ``fn(y)`` evaluated at the inside nodes."""
        vals = np.asarray(fn(self.grid.points), dtype=float).reshape(-1)
        p = SymplecticPotential(self, vals)
        return p.normalize() if normalize else p

    def same(self, other: "ToricModel") -> bool:
        return self is other or self.grid.key == other.grid.key


@dataclass(frozen=True)
class AffineFunction:
    """<b, y> + c on the polytope; encodes a torus element or a moment map."""

    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))
        object.__setattr__(self, "c", float(self.c))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) @ self.b + self.c

    def compose(self, other: "AffineFunction") -> "AffineFunction":
        """Group law of the (abelian) torus action: add the affine functions."""
        return AffineFunction(self.b + other.b, self.c + other.c)

    def inverse(self) -> "AffineFunction":
        return AffineFunction(-self.b, -self.c)

    @classmethod
    def identity(cls, n: int) -> "AffineFunction":
        return cls(np.zeros(n), 0.0)


@dataclass(frozen=True, eq=False)
class SymplecticPotential:
    """Deviation ``values`` = u - u_G at the inside nodes of ``model.grid``."""

    model: ToricModel
    values: np.ndarray
    normalized: bool = False
    convexified: bool = field(default=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.model.grid.size:
            raise GridMismatch(f"expected {self.model.grid.size} values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential values must be finite at every inside node")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __repr__(self) -> str:
        return f"<SymplecticPotential on {self.model!r} normalized={self.normalized}>"

    @property
    def grid(self) -> Grid:
        return self.model.grid

    @property
    def u(self) -> np.ndarray:
        """Full symplectic potential at the nodes."""
        return self.model.uG + self.values

    def box(self, fill=np.nan) -> np.ndarray:
        return self.grid.to_box(self.values, fill)

    def check_same(self, other: "SymplecticPotential") -> None:
        if not self.model.same(other.model):
            raise GridMismatch("potentials live on different models or grids")

    def with_values(self, values, normalized: bool | None = None) -> "SymplecticPotential":
        return replace(self, values=np.asarray(values, dtype=float),
                       normalized=self.normalized if normalized is None else normalized)

    def am(self) -> float:
        return -self.model.mean(self.values)

    def normalize(self) -> "SymplecticPotential":
        """Shift by the constant making AM vanish."""
        return replace(self, values=self.values - self.model.mean(self.values), normalized=True)

    # -- derivatives -------------------------------------------------------
    @cached_property
    def derivatives(self):
        return grid_derivatives(self.grid, self.values)

    def grad_u(self) -> np.ndarray:
        return self.model.gradG + self.derivatives[0]

    def hess_u(self) -> np.ndarray:
        return self.model.hessG + self.derivatives[1]

    def convexity_defect(self) -> float:
        """Most negative midpoint second difference of u along axes and diagonals,
        relative to the local scale (h^2)."""
        return convexity_defect(self.grid, self.u)

    def is_convex(self, tol: float = 1e-9) -> bool:
        return self.convexity_defect() >= -tol


def _shift(f, k, axis):
    """f[i + k] along ``axis``, NaN where the index leaves the box."""
    n = f.shape[axis]
    sh = [1] * f.ndim
    sh[axis] = n
    idx = np.arange(n).reshape(sh)
    g = np.roll(f, -k, axis)
    return np.where((idx + k >= 0) & (idx + k < n), g, np.nan)


def _first(out, *cands):
    for c in cands:
        out = np.where(np.isnan(out), c, out)
    return out


def _d1(f, axis, h):
    """First derivative: central, else one-sided second order, else first order."""
    s = {k: _shift(f, k, axis) for k in (-2, -1, 1, 2)}
    return _first(
        (s[1] - s[-1]) / (2 * h),
        (-3 * f + 4 * s[1] - s[2]) / (2 * h),
        (3 * f - 4 * s[-1] + s[-2]) / (2 * h),
        (s[1] - f) / h,
        (f - s[-1]) / h,
    )


def _d2(f, axis, h):
    s = {k: _shift(f, k, axis) for k in (-3, -2, -1, 1, 2, 3)}
    return _first(
        (s[1] - 2 * f + s[-1]) / h**2,
        (2 * f - 5 * s[1] + 4 * s[2] - s[3]) / h**2,
        (2 * f - 5 * s[-1] + 4 * s[-2] - s[-3]) / h**2,
        (f - 2 * s[1] + s[2]) / h**2,
        (f - 2 * s[-1] + s[-2]) / h**2,
    )


def _fill_nearest(a: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Replace NaNs inside ``mask`` by the value at the nearest finite node."""
    bad = np.isnan(a) & mask
    if not bad.any():
        return a
    from scipy.ndimage import distance_transform_edt

    _, ind = distance_transform_edt(~(np.isfinite(a) & mask), return_indices=True)
    return np.where(bad, a[tuple(ind)], a)


def grid_derivatives(grid: Grid, values: np.ndarray):
    """Finite-difference gradient (M, n) and Hessian (M, n, n) at inside nodes."""
    f = grid.to_box(values)
    h = grid.h
    m = grid.mask
    if grid.n == 1:
        g = _fill_nearest(_d1(f, 0, h), m)
        H = _fill_nearest(_d2(f, 0, h), m)
        return g[m][:, None], H[m][:, None, None]
    g0 = _fill_nearest(_d1(f, 0, h), m)
    g1 = _fill_nearest(_d1(f, 1, h), m)
    H00 = _fill_nearest(_d2(f, 0, h), m)
    H11 = _fill_nearest(_d2(f, 1, h), m)
    # mixed term: central 4-point where available, else derivative of a gradient
    c = (_shift(_shift(f, 1, 0), 1, 1) - _shift(_shift(f, 1, 0), -1, 1)
         - _shift(_shift(f, -1, 0), 1, 1) + _shift(_shift(f, -1, 0), -1, 1)) / (4 * h * h)
    m01 = _d1(np.where(m, g0, np.nan), 1, h)
    m10 = _d1(np.where(m, g1, np.nan), 0, h)
    H01 = _first(c, np.where(np.isnan(m01), m10, np.where(np.isnan(m10), m01, 0.5 * (m01 + m10))))
    H01 = _fill_nearest(H01, m)
    grad = np.stack([g0[m], g1[m]], axis=-1)
    hess = np.empty((grid.size, 2, 2))
    hess[:, 0, 0] = H00[m]
    hess[:, 1, 1] = H11[m]
    hess[:, 0, 1] = hess[:, 1, 0] = H01[m]
    return grad, hess


def convexity_defect(grid: Grid, u: np.ndarray) -> float:
    f = grid.to_box(u)
    worst = np.inf
    if grid.n == 1:
        dirs = [(1,)]
    else:
        dirs = [(1, 0), (0, 1), (1, 1), (1, -1)]
    for d in dirs:
        fp = f
        fm = f
        for ax, s in enumerate(d):
            if s:
                fp = np.roll(fp, -s, ax)
                fm = np.roll(fm, s, ax)
        sec = fp + fm - 2 * f
        # roll wraps around; mask edges
        sl = tuple(slice(1, -1) for _ in range(grid.n))
        val = np.nanmin(sec[sl]) if np.isfinite(sec[sl]).any() else np.inf
        worst = min(worst, val)
    return float(worst)


# ---------------------------------------------------------------------------
# potential files: JSON header + inline values or little-endian f8 sidecar

def save_potential(pot: SymplecticPotential, path, inline: bool | None = None) -> Path:
    path = Path(path)
    g = pot.grid
    header = {
        "format": "kfl-potential/1",
        "polytope": g.poly.to_json(),
        "polytope_hash": g.poly.hash,
        "grid_N": g.N,
        "grid_shape": list(g.shape),
        "n_values": g.size,
        "normalized": bool(pot.normalized),
        "convexified": bool(pot.convexified),
    }
    if inline is None:
        inline = g.size <= 4096
    if inline:
        header["values"] = [float(v) for v in pot.values]
    else:
        side = path.with_suffix(path.suffix + ".bin")
        pot.values.astype("<f8").tofile(side)
        header["sidecar"] = side.name
    path.write_text(json.dumps(header, indent=1))
    return path


def load_potential(path, model: ToricModel | None = None) -> SymplecticPotential:
    path = Path(path)
    header = json.loads(path.read_text())
    if model is None:
        poly = build_polytope(header["polytope"]["facets"])
        model = ToricModel(poly, header["grid_N"])
    if model.poly.hash != header["polytope_hash"] or list(model.grid.shape) != header["grid_shape"]:
        raise GridMismatch(f"{path} was written for a different polytope or grid")
    if "values" in header:
        vals = np.array(header["values"], dtype=float)
    else:
        vals = np.fromfile(path.parent / header["sidecar"], dtype="<f8")
    if vals.shape[0] != header["n_values"]:
        raise GridMismatch(f"{path}: value count mismatch")
    return SymplecticPotential(model, vals, normalized=header["normalized"], convexified=header.get("convexified", False))


def require_convex(pot: SymplecticPotential, strict: bool = False, tol: float = 1e-9) -> SymplecticPotential:
    """Return ``pot`` if convex, else its convex envelope (flagged)."""
    if pot.is_convex(tol * max(1.0, float(np.max(np.abs(pot.u))))):
        return pot
    if strict:
        raise NonConvexInput("symplectic potential is not convex on the grid")
    from .legendre import convex_envelope

    warnings.warn("non-convex potential replaced by its convex envelope", stacklevel=2)
    env = convex_envelope(pot.grid, pot.u)
    return replace(pot, values=env - pot.model.uG, convexified=True)
