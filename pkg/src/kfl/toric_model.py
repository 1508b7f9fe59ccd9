"""Envelopes, geodesics and the torus action on symplectic potentials.

Also re-exports the data model so ``kfl.toric_model`` is the one-stop
import for polytopes, potentials and Legendre duality.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .errors import ParameterOutOfRange
from .legendre import BoxFunction, dual_rooftop_check, kahler_data, legendre_transform
from .model import (
    AffineFunction,
    SymplecticPotential,
    ToricModel,
    load_potential,
    save_potential,
)
from .polytope import Polytope, build_polytope, named, polytope_from_json

__all__ = [
    "AffineFunction", "BoxFunction", "Polytope", "SymplecticPotential", "ToricModel",
    "build_polytope", "dual_rooftop_check", "geodesic", "initial_tangent", "kahler_data",
    "legendre_transform", "load_potential", "named", "polytope_from_json", "rooftop_envelope",
    "save_potential", "torus_act",
]


def rooftop_envelope(u: SymplecticPotential, v: SymplecticPotential) -> SymplecticPotential:
    """Largest psh minorant of min(phi_u, phi_v): node-wise max of the potentials."""
    u.check_same(v)
    return SymplecticPotential(u.model, np.maximum(u.values, v.values))


def geodesic(u0: SymplecticPotential, u1: SymplecticPotential, t: float) -> SymplecticPotential:
    u0.check_same(u1)
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ParameterOutOfRange(f"t = {t} not in [0, 1]")
    if t == 0.0:
        return u0
    if t == 1.0:
        return u1
    vals = (1.0 - t) * u0.values + t * u1.values
    return SymplecticPotential(u0.model, vals, normalized=u0.normalized and u1.normalized)


def initial_tangent(u0: SymplecticPotential, u1: SymplecticPotential) -> np.ndarray:
    """Kähler-side initial velocity of the geodesic, as a function on P."""
    u0.check_same(u1)
    return -(u1.values - u0.values)


def torus_act(u: SymplecticPotential, g: AffineFunction) -> SymplecticPotential:
    """Add <b, y> + c; for a normalised input c is replaced so AM stays 0."""
    lin = u.grid.points @ np.broadcast_to(g.b, (u.model.n,))
    if u.normalized:
        vals = u.values + lin
        return replace(u, values=vals - u.model.mean(vals))
    return replace(u, values=u.values + lin + g.c)
