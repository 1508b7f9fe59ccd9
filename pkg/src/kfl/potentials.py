"""Families of test potentials (deviations from the reference)."""
from __future__ import annotations

import numpy as np

from .model import AffineFunction, SymplecticPotential, ToricModel
from .toric_model import torus_act


def _softplus(t):
    return np.logaddexp(0.0, t)


def random_convex(model: ToricModel, rng: np.random.Generator, scale: float = 1.0, bumps: int = 3,
                  normalize: bool = True) -> SymplecticPotential:
    """Convex deviation: random PSD quadratic plus softplus ridges, times ``scale``."""
    n = model.n
    y = model.grid.points - model.poly.barycenter
    B = rng.normal(size=(n, n))
    A = B @ B.T / n
    w = 0.5 * np.einsum("qi,ij,qj->q", y, A, y)
    for _ in range(bumps):
        a = rng.normal(size=n) * 1.5
        w = w + 0.3 * _softplus(y @ a + rng.normal(scale=0.5))
    w = w + y @ rng.normal(scale=0.2, size=n)
    pot = SymplecticPotential(model, scale * w)
    return pot.normalize() if normalize else pot


def quadratic(model: ToricModel, A, b=None, c: float = 0.0, normalize: bool = False) -> SymplecticPotential:
    A = np.atleast_2d(np.asarray(A, float))
    y = model.grid.points
    w = 0.5 * np.einsum("qi,ij,qj->q", y, A, y) + c
    if b is not None:
        w = w + y @ np.broadcast_to(np.asarray(b, float), (model.n,))
    pot = SymplecticPotential(model, w)
    return pot.normalize() if normalize else pot


def affine_orbit(base: SymplecticPotential, direction, ts) -> list[SymplecticPotential]:
    d = np.broadcast_to(np.asarray(direction, float), (base.model.n,))
    return [torus_act(base, AffineFunction(t * d, 0.0)) for t in ts]


def symmetric_p1(model: ToricModel, rng: np.random.Generator, scale: float = 1.0) -> SymplecticPotential:
    """Even convex deviation on an interval symmetric about 0, AM-normalised."""
    if model.n != 1 or not np.allclose(model.poly.barycenter, 0.0):
        raise ValueError("needs a symmetric interval")
    y = model.grid.points[:, 0]
    k = rng.uniform(0.5, 4.0)
    w = rng.uniform(0, 1) * y**2 + rng.uniform(0, 1) * y**4 + rng.uniform(0, 1) * (np.logaddexp(k * y, -k * y) / k)
    pot = SymplecticPotential(model, scale * w)
    return pot.normalize()


FAMILIES = ("random", "quadratic", "orbit", "symmetric")
