"""Delzant polytopes given by facet inequalities <l_i, y> + c_i >= 0."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import DegeneratePolytope, NotDelzant, UnboundedPolytope

_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Polytope:
    """A bounded full-dimensional Delzant polytope in dimension 1 or 2.

    ``normals`` are the primitive inward facet normals, ``offsets`` the
    constants c_i.  Vertices are listed counter-clockwise for n = 2.
    """

    normals: np.ndarray
    offsets: np.ndarray
    vertices: np.ndarray
    volume: float
    facet_measure: np.ndarray  # lattice-normalised boundary measure per facet
    name: str = ""
    _hash: str = field(default="", repr=False)

    @property
    def n(self) -> int:
        return int(self.normals.shape[1])

    @property
    def n_facets(self) -> int:
        return int(self.normals.shape[0])

    @property
    def boundary_measure(self) -> float:
        return float(self.facet_measure.sum())

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def barycenter(self) -> np.ndarray:
        if self.n == 1:
            return self.vertices.mean(axis=0)
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = cross.sum() / 2.0
        return np.array([((v[:, 0] + w[:, 0]) * cross).sum(), ((v[:, 1] + w[:, 1]) * cross).sum()]) / (6.0 * a)

    def ell(self, y: np.ndarray) -> np.ndarray:
        """Facet functions l_i(y) for points y of shape (..., n); returns (..., m)."""
        y = np.asarray(y, dtype=float)
        return y @ self.normals.T.astype(float) + self.offsets

    def contains(self, y: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return (self.ell(y) >= -tol).all(axis=-1)

    def center_point(self, level: float = 1.0) -> np.ndarray | None:
        """The point p with l_i(p) = level for every facet, if it exists."""
        L = self.normals.astype(float)
        rhs = level - self.offsets
        p, *_ = np.linalg.lstsq(L, rhs, rcond=None)
        if np.max(np.abs(L @ p - rhs)) > 1e-10:
            return None
        return p

    @property
    def is_fano(self) -> bool:
        return self.center_point(1.0) is not None

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "facets": [{"l": [int(a) for a in l], "c": float(c)} for l, c in zip(self.normals, self.offsets)],
        }

    @property
    def hash(self) -> str:
        return self._hash

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"<Polytope{tag} n={self.n} facets={self.n_facets} volume={self.volume:g}>"


def _canonical_hash(normals, offsets) -> str:
    # facet order does not change the polytope, the grid or u_G
    facets = sorted((tuple(int(a) for a in l), repr(float(c))) for l, c in zip(np.asarray(normals), offsets))
    payload = json.dumps({"facets": facets})
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _check_bounded_full(L: np.ndarray, c: np.ndarray) -> None:
    n = L.shape[1]
    # Chebyshev centre: max r s.t. <l_i,y> + c_i >= r |l_i|
    norms = np.linalg.norm(L, axis=1)
    A = np.hstack([-L, norms[:, None]])
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=A, b_ub=c, bounds=[(None, None)] * n + [(None, 1e6)])
    if res.status == 2:
        raise DegeneratePolytope("facet inequalities are infeasible")
    if res.status == 3 or (res.status == 0 and res.x[-1] > 1e5):
        raise UnboundedPolytope("facet inequalities do not bound a region")
    if res.status != 0:
        raise DegeneratePolytope(res.message)
    if res.x[-1] <= _TOL:
        raise DegeneratePolytope("polytope has empty interior")
    for k in range(n):
        for sgn in (1.0, -1.0):
            obj = np.zeros(n)
            obj[k] = -sgn
            r = linprog(obj, A_ub=-L, b_ub=c, bounds=[(None, None)] * n)
            if r.status == 3:
                raise UnboundedPolytope("facet inequalities do not bound a region")


def _vertices_2d(L: np.ndarray, c: np.ndarray):
    m = L.shape[0]
    pts, active = [], []
    for a in range(m):
        for b in range(a + 1, m):
            M = L[[a, b]].astype(float)
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            y = np.linalg.solve(M, -c[[a, b]])
            if (L @ y + c >= -_TOL).all():
                pts.append(y)
    if not pts:
        raise DegeneratePolytope("no vertices")
    pts = np.array(pts)
    uniq = []
    for p in pts:
        if not any(np.allclose(p, q, atol=1e-9) for q in uniq):
            uniq.append(p)
    pts = np.array(uniq)
    ctr = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - ctr[1], pts[:, 0] - ctr[0]))
    pts = pts[order]
    for p in pts:
        act = np.flatnonzero(np.abs(L @ p + c) < 1e-9)
        active.append(act)
    return pts, active


def build_polytope(facets, name: str = "") -> Polytope:
    """Build and validate a polytope from ``[(normal, offset), ...]``.

    Raises UnboundedPolytope, DegeneratePolytope or NotDelzant.
    """
    normals, offsets = [], []
    for item in facets:
        if isinstance(item, dict):
            l, cc = item["l"], item["c"]
        else:
            l, cc = item
        normals.append(np.atleast_1d(np.asarray(l)))
        offsets.append(float(cc))
    L = np.array(normals)
    if not np.allclose(L, np.round(L)):
        raise NotDelzant("facet normals must be integer vectors")
    L = np.round(L).astype(np.int64)
    c = np.array(offsets, dtype=float)
    if L.ndim != 2 or L.shape[1] not in (1, 2):
        raise DegeneratePolytope("only dimensions 1 and 2 are supported")
    n = L.shape[1]
    if L.shape[0] < n + 1:
        raise UnboundedPolytope(f"need at least {n + 1} facets, got {L.shape[0]}")
    for l in L:
        if np.gcd.reduce(np.abs(l)) != 1:
            raise NotDelzant(f"facet normal {l.tolist()} is not primitive")
    _check_bounded_full(L.astype(float), c)

    if n == 1:
        lows = [-cc / l[0] for l, cc in zip(L, c) if l[0] > 0]
        highs = [-cc / l[0] for l, cc in zip(L, c) if l[0] < 0]
        lo, hi = max(lows), min(highs)
        # redundant facets would break the two-vertex structure
        act_lo = [i for i, (l, cc) in enumerate(zip(L, c)) if abs(l[0] * lo + cc) < 1e-9]
        act_hi = [i for i, (l, cc) in enumerate(zip(L, c)) if abs(l[0] * hi + cc) < 1e-9]
        if len(act_lo) != 1 or len(act_hi) != 1 or L.shape[0] != 2:
            raise NotDelzant("an interval must be cut out by exactly two facets")
        verts = np.array([[lo], [hi]])
        vol = hi - lo
        fm = np.ones(2)
    else:
        verts, active = _vertices_2d(L, c)
        for p, act in zip(verts, active):
            if len(act) != 2:
                raise NotDelzant(f"vertex {p.tolist()} is not simple (active facets {act.tolist()})")
            if abs(round(np.linalg.det(L[act].astype(float)))) != 1:
                raise NotDelzant(f"vertex {p.tolist()}: facet normals {L[act].tolist()} are not a lattice basis")
        w = np.roll(verts, -1, axis=0)
        vol = 0.5 * abs(np.sum(verts[:, 0] * w[:, 1] - w[:, 0] * verts[:, 1]))
        fm = np.zeros(L.shape[0])
        for i in range(L.shape[0]):
            on = verts[np.abs(verts @ L[i] + c[i]) < 1e-9]
            if len(on) != 2:
                raise DegeneratePolytope(f"facet {i} is redundant")
            fm[i] = np.linalg.norm(on[1] - on[0]) / np.linalg.norm(L[i])
    if vol <= _TOL:
        raise DegeneratePolytope("zero volume")
    return Polytope(L, c, verts, float(vol), fm, name, _canonical_hash(L, c))


def polytope_from_json(obj: dict) -> Polytope:
    return build_polytope(obj["facets"], name=obj.get("name", ""))


# ---------------------------------------------------------------------------
# named models

def interval(a: float = 0.0, b: float = 1.0) -> Polytope:
    return build_polytope([([1], -a), ([-1], b)], name=f"interval[{a:g},{b:g}]")


def p1() -> Polytope:
    """Anticanonical P^1: [-1, 1]."""
    return build_polytope([([1], 1.0), ([-1], 1.0)], name="P1")


def p2() -> Polytope:
    return build_polytope([([1, 0], 1.0), ([0, 1], 1.0), ([-1, -1], 1.0)], name="P2")


def dp3() -> Polytope:
    """Anticanonical hexagon of the blow-up of P^2 at three points."""
    return build_polytope(
        [([1, 0], 1.0), ([0, 1], 1.0), ([-1, 0], 1.0), ([0, -1], 1.0), ([1, 1], 1.0), ([-1, -1], 1.0)],
        name="dP3",
    )


def dp1() -> Polytope:
    """Anticanonical trapezoid of the blow-up of P^2 at one point.

    Symmetric under y1 <-> y2, so the soliton/Futaki direction is (1, 1).
    """
    return build_polytope(
        [([1, 0], 1.0), ([0, 1], 1.0), ([-1, -1], 1.0), ([1, 1], 1.0)],
        name="dP1",
    )


def dp1_small() -> Polytope:
    """Non-anticanonical dP1 trapezoid {y1>=0, y2>=0, y1+y2<=2, y2<=1}."""
    return build_polytope([([1, 0], 0.0), ([0, 1], 0.0), ([-1, -1], 2.0), ([0, -1], 1.0)], name="dP1-small")


NAMED = {"interval": interval, "P1": p1, "P2": p2, "dP3": dp3, "dP1": dp1, "dP1-small": dp1_small}


def named(name: str) -> Polytope:
    try:
        return NAMED[name]()
    except KeyError:
        raise KeyError(f"unknown polytope {name!r}; choose from {sorted(NAMED)}") from None
