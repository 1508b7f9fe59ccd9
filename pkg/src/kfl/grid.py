"""Uniform tensor grids over a polytope's bounding box, with P1 quadrature.

Squares are split along the anti-diagonal, so facets with directions (1,0),
(0,1) and (1,-1) through grid nodes are resolved exactly and the P1 rule is
second order.  Cells straddling other facets get clipped-area weights.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import GridTooCoarse
from .polytope import Polytope


def _choose_spacing(poly: Polytope, N: int) -> tuple[float, bool]:
    lo, hi = poly.bbox
    ext = float(np.max(hi - lo))
    for k in range(0, 40):
        h = 2.0 ** (-k)
        if ext / h + 1 > N:
            break
        best = h
    else:  # pragma: no cover
        best = None
    if best is not None and ext / best + 1 >= (N - 1) / 2 + 1:
        rel = (poly.vertices - lo) / best
        if np.allclose(rel, np.round(rel), atol=1e-9):
            return best, True
    return ext / (N - 1), False


def _clip_polygon(poly_pts, L, c):
    """Sutherland-Hodgman clip of a convex polygon against <L_i,y>+c_i >= 0."""
    pts = list(poly_pts)
    for l, cc in zip(L, c):
        if not pts:
            break
        out = []
        for k in range(len(pts)):
            p, q = pts[k], pts[(k + 1) % len(pts)]
            fp, fq = l @ p + cc, l @ q + cc
            if fp >= 0:
                out.append(p)
            if (fp >= 0) != (fq >= 0):
                t = fp / (fp - fq)
                out.append(p + t * (q - p))
        pts = out
    return pts


def _poly_area_centroid(pts):
    if len(pts) < 3:
        return 0.0, None
    P = np.array(pts)
    Q = np.roll(P, -1, axis=0)
    cr = P[:, 0] * Q[:, 1] - Q[:, 0] * P[:, 1]
    a = cr.sum() / 2.0
    if abs(a) < 1e-300:
        return 0.0, None
    cx = ((P[:, 0] + Q[:, 0]) * cr).sum() / (6 * a)
    cy = ((P[:, 1] + Q[:, 1]) * cr).sum() / (6 * a)
    return abs(a), np.array([cx, cy])


class Grid:
    """Tensor grid with inside-mask, quadrature weights and boundary weights.

    Functions on the grid are flat arrays over the inside nodes (row-major
    order of the box).
    """

    def __init__(self, poly: Polytope, N: int):
        if N < 5:
            raise GridTooCoarse("need at least 5 nodes per axis")
        self.poly = poly
        self.N = int(N)
        self.n = poly.n
        self.h, self.aligned = _choose_spacing(poly, N)
        lo, hi = poly.bbox
        self.lo = lo.astype(float)
        self.shape = tuple(int(round((hi[k] - lo[k]) / self.h)) + 1 for k in range(self.n))
        self.axes = [self.lo[k] + self.h * np.arange(self.shape[k]) for k in range(self.n)]
        mesh = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)
        tol = 1e-9 * self.h
        self.box_ell = poly.ell(mesh)
        self.mask = (self.box_ell >= -tol).all(axis=-1)
        self.points = mesh[self.mask]
        self.ell = np.maximum(self.box_ell[self.mask], 0.0)
        self.index = np.full(self.shape, -1, dtype=np.int64)
        self.index[self.mask] = np.arange(self.size)
        self.weights = self.region_weights(poly.normals.astype(float), poly.offsets)

    def __repr__(self) -> str:
        return f"<Grid {self.poly.name or 'P'} N={self.N} h={self.h:g} shape={self.shape} inside={self.size}>"

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    @property
    def key(self) -> tuple:
        return (self.poly.hash, self.shape, self.h)

    def to_box(self, values: np.ndarray, fill: float = np.nan) -> np.ndarray:
        out = np.full(self.shape, fill, dtype=float)
        out[self.mask] = values
        return out

    def from_box(self, box: np.ndarray) -> np.ndarray:
        return np.asarray(box)[self.mask]

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))

    def mean(self, values: np.ndarray) -> float:
        return self.integrate(values) / self.poly.volume

    # ------------------------------------------------------------------
    def region_weights(self, L: np.ndarray, c: np.ndarray) -> np.ndarray:
        """P1 quadrature weights (over inside nodes) for the region {Ly + c >= 0}."""
        h = self.h
        if self.n == 1:
            z = self.points[:, 0]
            inside = ((z[:, None] * L[:, 0] + c) >= -1e-9 * h).all(axis=1)
            w = np.zeros(self.size)
            idx = np.flatnonzero(inside)
            if idx.size >= 2:
                w[idx] = h
                w[idx[0]] = w[idx[-1]] = h / 2
            # partial end cells
            a = max(-cc / l for l, cc in zip(L[:, 0], c) if l > 0)
            b = min(-cc / l for l, cc in zip(L[:, 0], c) if l < 0)
            if idx.size:
                ga, gb = z[idx[0]] - a, b - z[idx[-1]]
                if ga > 1e-12:
                    w[idx[0]] += ga  # first order extension
                if gb > 1e-12:
                    w[idx[-1]] += gb
            return w
        box_in = (np.einsum("ijk,mk->ijm", np.stack(np.meshgrid(*self.axes, indexing="ij"), -1), L) + c
                  >= -1e-9 * h).all(axis=-1) & self.mask
        idx = np.where(box_in, self.index, -1)
        w = np.zeros(self.size)
        area3 = h * h / 6.0
        tris = [
            (idx[:-1, :-1], idx[1:, :-1], idx[:-1, 1:]),
            (idx[1:, :-1], idx[1:, 1:], idx[:-1, 1:]),
        ]
        offs = [((0, 0), (1, 0), (0, 1)), ((1, 0), (1, 1), (0, 1))]
        for (a, b, cc), off in zip(tris, offs):
            full = (a >= 0) & (b >= 0) & (cc >= 0)
            for arr in (a, b, cc):
                np.add.at(w, arr[full], area3)
            partial = ((a >= 0) | (b >= 0) | (cc >= 0)) & ~full
            # also catch triangles with no inside node that still meet the region
            for i, j in zip(*np.nonzero(partial)):
                verts = [np.array([self.axes[0][i + di], self.axes[1][j + dj]]) for di, dj in off]
                ids = [arr[i, j] for arr in (a, b, cc)]
                clipped = _clip_polygon(verts, L, c)
                area, cen = _poly_area_centroid(clipped)
                if area <= 0:
                    continue
                # barycentric coordinates of the centroid
                T = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
                s, t = np.linalg.solve(T, cen - verts[0])
                lam = np.array([1 - s - t, s, t])
                ok = np.array([k >= 0 for k in ids])
                lam = np.where(ok, lam, 0.0)
                if lam.sum() <= 0:
                    lam = ok.astype(float)
                lam = lam / lam.sum()
                for k, lm in zip(ids, lam):
                    if k >= 0:
                        w[k] += area * lm
        return w

    def collar_weights(self, k: int) -> np.ndarray:
        """Weights for the shrunken polytope {l_i >= k h}; zero outside it."""
        cache = self.__dict__.setdefault("_collar", {})
        if k not in cache:
            L = self.poly.normals.astype(float)
            cache[k] = self.region_weights(L, self.poly.offsets - k * self.h)
        return cache[k]

    @cached_property
    def boundary_weights(self) -> np.ndarray:
        """Weights of the lattice-normalised boundary measure."""
        w = np.zeros(self.size)
        poly = self.poly
        if self.n == 1:
            for v in poly.vertices[:, 0]:
                k = int(np.argmin(np.abs(self.points[:, 0] - v)))
                w[k] += 1.0
            return w
        verts = poly.vertices
        for i, (l, cc) in enumerate(zip(poly.normals, poly.offsets)):
            on = verts[np.abs(verts @ l + cc) < 1e-9]
            p, q = on[0], on[1]
            seg = np.linalg.norm(q - p)
            dens = 1.0 / np.linalg.norm(l)
            if self.aligned:
                sel = np.flatnonzero(np.abs(self.ell[:, i]) < 1e-9 * self.h)
                t = (self.points[sel] - p) @ (q - p) / seg
                order = np.argsort(t)
                sel, t = sel[order], t[order]
                dt = np.diff(t)
                ww = np.zeros(len(sel))
                ww[:-1] += dt / 2
                ww[1:] += dt / 2
                w[sel] += ww * dens
            else:
                m = max(4, int(np.ceil(4 * seg / self.h)))
                ts = (np.arange(m) + 0.5) / m
                pts = p + ts[:, None] * (q - p)
                ids, lam = self.p1_stencil(pts)
                np.add.at(w, ids.ravel(), (lam * (seg / m) * dens).ravel())
        return w

    # ------------------------------------------------------------------
    def p1_stencil(self, pts: np.ndarray):
        """Node indices and P1 interpolation weights at arbitrary points.

        Outside-polytope stencil nodes get weight redistributed onto the
        inside ones.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        h = self.h
        if self.n == 1:
            r = (pts[:, 0] - self.lo[0]) / h
            i = np.clip(np.floor(r).astype(int), 0, self.shape[0] - 2)
            s = r - i
            ids = np.stack([self.index[i], self.index[i + 1]], axis=1)
            lam = np.stack([1 - s, s], axis=1)
        else:
            r = (pts - self.lo) / h
            i = np.clip(np.floor(r[:, 0]).astype(int), 0, self.shape[0] - 2)
            j = np.clip(np.floor(r[:, 1]).astype(int), 0, self.shape[1] - 2)
            s, t = r[:, 0] - i, r[:, 1] - j
            lowA = s + t <= 1
            ids = np.where(
                lowA[:, None],
                np.stack([self.index[i, j], self.index[i + 1, j], self.index[i, j + 1]], 1),
                np.stack([self.index[i + 1, j], self.index[i + 1, j + 1], self.index[i, j + 1]], 1),
            )
            lam = np.where(
                lowA[:, None],
                np.stack([1 - s - t, s, t], 1),
                np.stack([1 - t, s + t - 1, 1 - s], 1),
            )
        ok = ids >= 0
        lam = np.where(ok, lam, 0.0)
        tot = lam.sum(axis=1, keepdims=True)
        bad = tot[:, 0] <= 1e-14
        lam = np.where(bad[:, None], ok / np.maximum(ok.sum(1, keepdims=True), 1), lam / np.where(bad[:, None], 1, tot))
        ids = np.where(ok, ids, 0)
        return ids, lam

    def interpolate(self, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
        ids, lam = self.p1_stencil(pts)
        return (values[ids] * lam).sum(axis=1)


_GRID_CACHE: dict = {}


def grid_for(poly: Polytope, N: int) -> Grid:
    key = (poly.hash, int(N))
    g = _GRID_CACHE.get(key)
    if g is None:
        if len(_GRID_CACHE) > 32:
            _GRID_CACHE.clear()
        g = _GRID_CACHE[key] = Grid(poly, N)
    return g
