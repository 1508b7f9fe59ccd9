"""Quotient distance and energy under the torus action, and properness fits."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, lsq_linear, minimize

from . import _accel
from .errors import InsufficientSpread, SolverFailure
from .functionals import j_energy
from .legendre import kahler_data
from .model import AffineFunction, SymplecticPotential
from .toric_model import torus_act


@dataclass
class QuotientResult:
    value: float
    minimizer: AffineFunction
    iterations: int
    residual: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "minimizer": {"b": [float(x) for x in self.minimizer.b], "c": self.minimizer.c},
            "iterations": self.iterations,
            "residual": self.residual,
        }


# ---------------------------------------------------------------------------
# weighted L1 affine fit


def _l1_objective(r, w):
    return float(np.dot(w, np.abs(r)))


def _optimality_residual(Phi, w, r, scale):
    """Distance of 0 from the subdifferential of sum w |r| at the current fit."""
    zero = np.abs(r) <= 1e-12 * scale
    fixed = Phi[~zero].T @ (w[~zero] * np.sign(r[~zero]))
    if not zero.any():
        return float(np.linalg.norm(fixed))
    A = Phi[zero].T * w[zero]
    sol = lsq_linear(A, -fixed, bounds=(-1.0, 1.0))
    return float(np.linalg.norm(A @ sol.x + fixed))


def _polish(Phi, d, w, theta, band: int = 2000):
    """Exact vertex solution: LP over the nodes nearest the fit, signs of the
    remaining residuals held fixed (band widened until they stay fixed)."""
    M, p = Phi.shape
    while True:
        r = d - Phi @ theta
        k = min(M, band)
        near = np.argpartition(np.abs(r), k - 1)[:k] if k < M else np.arange(M)
        far = np.ones(M, dtype=bool)
        far[near] = False
        s = np.sign(r[far])
        # variables: theta (free), t_k >= |d_k - Phi_k theta| on the band
        c = np.r_[-(Phi[far].T @ (w[far] * s)), w[near]]
        I = sparse.identity(k, format="csr")
        A = sparse.bmat([[sparse.csr_matrix(-Phi[near]), -I], [sparse.csr_matrix(Phi[near]), -I]], format="csr")
        b = np.r_[-d[near], d[near]]
        sol = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * p + [(0, None)] * k, method="highs")
        if sol.status != 0:
            return theta
        new = sol.x[:p]
        r_new = d - Phi @ new
        if k == M or np.all(np.sign(r_new[far]) == s):
            if _l1_objective(r_new, w) <= _l1_objective(r, w) + 1e-15 * max(1.0, abs(_l1_objective(r, w))):
                return new
            return theta
        band *= 4


def l1_affine_fit(Y: np.ndarray, d: np.ndarray, w: np.ndarray, starts=None, tol: float = 1e-8,
                  intercept: bool = True):
    """min over theta = (b, c) of sum_k w_k |d_k - <b, y_k> - c| (c omitted
    when ``intercept`` is false).

    Smoothed Newton on sum w (sqrt(r^2 + delta^2) - delta) with delta
    continuation 1e-2 -> 1e-8 (relative to the data scale), multi-start.
    Returns (theta, objective, iterations, residual).
    """
    Phi = np.column_stack([Y, np.ones(len(d))]) if intercept else np.asarray(Y, float)
    scale = max(float(np.max(np.abs(d))), 1e-300)
    sw = np.sqrt(w)
    ls, *_ = np.linalg.lstsq(Phi * sw[:, None], d * sw, rcond=None)
    if starts is None:
        starts = [np.zeros(Phi.shape[1]), ls]
    best = None
    total_it = 0
    for theta in starts:
        theta = np.asarray(theta, float).copy()
        for delta in 10.0 ** -np.arange(2, 9):
            dl = delta * scale
            for _ in range(50):
                r = d - Phi @ theta
                q = np.sqrt(r * r + dl * dl)
                g = -Phi.T @ (w * r / q)
                H = (Phi.T * (w * dl * dl / q**3)) @ Phi
                lam = 1e-12 * np.trace(H) + 1e-300
                step = np.linalg.solve(H + lam * np.eye(len(theta)), -g)
                f0 = float(np.dot(w, q - dl))
                t = 1.0
                while t > 1e-12:
                    r2 = d - Phi @ (theta + t * step)
                    if float(np.dot(w, np.sqrt(r2 * r2 + dl * dl) - dl)) <= f0 + 1e-4 * t * float(g @ step):
                        break
                    t *= 0.5
                theta = theta + t * step
                total_it += 1
                if np.linalg.norm(t * step) <= 1e-14 * (1 + np.linalg.norm(theta)):
                    break
        obj = _l1_objective(d - Phi @ theta, w)
        if best is None or obj < best[1] - 1e-15 or (abs(obj - best[1]) <= 1e-15 and tuple(theta) < tuple(best[0])):
            best = (theta, obj)
    theta, obj = best
    theta = _polish(Phi, d, w, theta)
    obj = _l1_objective(d - Phi @ theta, w)
    r = d - Phi @ theta
    res = _optimality_residual(Phi, w, r, scale) / max(float(w.sum()), 1e-300)
    return theta, obj, total_it, res


def d1_quotient(u: SymplecticPotential, v: SymplecticPotential, tol: float = 1e-8, strict: bool = False,
                free_constant: bool = True) -> QuotientResult:
    """min over affine l of V^-1 int |u - (v + l)| dy.

    With ``free_constant`` false the constant is the one the torus action
    imposes on AM-normalised potentials (l has zero mean over P), so the
    minimiser acts within the normalised slice.
    """
    u.check_same(v)
    m = u.model
    d = u.values - v.values
    if not np.any(d):
        return QuotientResult(0.0, AffineFunction.identity(m.n), 0, 0.0)
    if free_constant:
        theta, obj, it, res = l1_affine_fit(m.grid.points, d, m.grid.weights)
        ell = AffineFunction(theta[:-1], theta[-1])
    else:
        bary = m.poly.barycenter
        theta, obj, it, res = l1_affine_fit(m.grid.points - bary, d, m.grid.weights, intercept=False)
        ell = AffineFunction(theta, -float(theta @ bary))
    value = obj / m.V
    # a smoothed optimum can sit a hair off the kink; the value is what matters
    if strict and res > tol and value > tol:
        raise SolverFailure(f"L1 fit optimality residual {res:.3e} above {tol:g}")
    return QuotientResult(float(value), ell, it, float(res))


# ---------------------------------------------------------------------------


def _j_of_b(u: SymplecticPotential, b: np.ndarray):
    ub = torus_act(u.normalize() if not u.normalized else u, AffineFunction(b, 0.0))
    J = j_energy(ub)[0]
    kd = kahler_data(ub)
    # dJ/db = barycenter - mean of the conjugate maximiser
    grad = ub.model.poly.barycenter - np.array([ub.model.mean(kd.S[:, k]) for k in range(ub.model.n)])
    return J, grad


def j_quotient(u: SymplecticPotential, starts=None, seed: int = 0) -> QuotientResult:
    """inf over torus elements of J of the acted potential (multi-start L-BFGS)."""
    n = u.model.n
    if starts is None:
        rng = np.random.default_rng(seed)
        starts = [np.zeros(n)] + [rng.normal(scale=0.5, size=n) for _ in range(2)]
    best = None
    nit = 0
    for b0 in starts:
        res = minimize(lambda b: _j_of_b(u, b), np.asarray(b0, float), jac=True, method="L-BFGS-B",
                       options={"maxiter": 200, "gtol": 1e-9, "ftol": 1e-14})
        nit += int(res.nit)
        cand = (float(res.fun), tuple(np.round(res.x, 12)), res)
        if best is None or cand[:2] < best[:2]:
            best = cand
    if best is None or not np.isfinite(best[0]):
        raise SolverFailure("J minimisation over the torus failed")
    res = best[2]
    return QuotientResult(float(res.fun), AffineFunction(res.x, 0.0), nit, float(np.linalg.norm(res.jac)))


def torus_polar(theta, r):
    """Polar split g = k exp(JX) of (C*)^n: k = angles, X = radial part."""
    return np.asarray(theta, float).copy(), np.asarray(r, float).copy()


# ---------------------------------------------------------------------------


@dataclass
class PropernessReport:
    C: float
    D: float
    n_samples: int
    min_margin: float
    family_descriptor: str = ""
    verdict: str = ""
    threshold: float = 1e-3
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def properness_fit(samples, family: str = "", threshold: float = 1e-3) -> PropernessReport:
    """Linear lower bound f >= C d - D.

    C is the slope of the lower convex hull of the (d, f) cloud on its last
    edge (the largest C for which the far-most sample is not the binding
    one); D >= 0 is then the smallest offset making every margin
    nonnegative.
    """
    arr = np.asarray([(float(d), float(f)) for d, f in samples], dtype=float)
    if arr.shape[0] < 10:
        raise InsufficientSpread(f"need at least 10 samples, got {arr.shape[0]}")
    d, f = arr[:, 0], arr[:, 1]
    pos = d[d > 0]
    if pos.size < 2 or pos.max() / pos.min() < 10:
        raise InsufficientSpread("d values must span a ratio of at least 10")
    # keep the lowest f for repeated d values
    order = np.lexsort((f, d))
    ds, fs = d[order], f[order]
    first = np.r_[True, np.diff(ds) > 0]
    ds, fs = ds[first], fs[first]
    hull = _accel.lower_hull(ds, fs)
    if len(hull) < 2:
        C = 0.0
    else:
        i, j = hull[-2], hull[-1]
        C = (fs[j] - fs[i]) / (ds[j] - ds[i])
    C = max(0.0, float(C))
    g = f - C * d
    D = max(0.0, -float(g.min()))
    # the binding sample gets margin exactly 0, not a rounding residue
    margins = g - g.min() if D > 0 else g
    return PropernessReport(
        C=C, D=D, n_samples=int(arr.shape[0]), min_margin=float(margins.min()),
        family_descriptor=family, verdict="proper" if C >= threshold else "not-proper", threshold=threshold,
    )
