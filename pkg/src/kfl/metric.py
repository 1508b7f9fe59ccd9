"""The d1 distance by three routes, mixed-measure comparison and curve length."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import GridMismatch, RouteDisagreement, UnsortedTimestamps
from .functionals import am
from .legendre import conjugate_at, kahler_data
from .model import SymplecticPotential
from .toric_model import geodesic, rooftop_envelope


@dataclass
class DistanceReport:
    d1_l1: float
    d1_pythagorean: float
    d1_pathlength: float | None = None
    mixed_l1: float | None = None
    agreement: float = 0.0

    @property
    def value(self) -> float:
        return self.d1_l1

    def to_dict(self) -> dict:
        return asdict(self)


def _rel(a: float, b: float) -> float:
    s = max(abs(a), abs(b))
    return 0.0 if s == 0 else abs(a - b) / s


def d1(u: SymplecticPotential, v: SymplecticPotential, pathlength: bool = False, mixed: bool = False,
       tol: float = 1e-3, segments: int = 32) -> DistanceReport:
    u.check_same(v)
    l1 = u.model.mean(np.abs(u.values - v.values))
    # AM(u) + AM(v) - 2 AM(P(u, v)), with the rooftop as a max of symplectic potentials
    pyth = am(u) + am(v) - 2.0 * am(rooftop_envelope(u, v))
    routes = [l1, pyth]
    path = None
    if pathlength:
        ts = np.linspace(0.0, 1.0, segments + 1)
        path = curve_length([geodesic(u, v, t) for t in ts], ts)
        routes.append(path)
    agreement = max(_rel(a, b) for i, a in enumerate(routes) for b in routes[i + 1:])
    if agreement > tol and max(routes) > 1e-12:
        raise RouteDisagreement(f"d1 routes disagree by {agreement:.3e} (routes {routes})")
    return DistanceReport(l1, pyth, path, mixed_l1(u, v) if mixed else None, agreement)


def mixed_l1(u: SymplecticPotential, v: SymplecticPotential) -> float:
    """V^-1 int |phi_u - phi_v| omega_u^n + V^-1 int |phi_u - phi_v| omega_v^n."""
    u.check_same(v)
    return _one_side(u, v) + _one_side(v, u)


def _one_side(u: SymplecticPotential, v: SymplecticPotential) -> float:
    # points of M in u's moment coordinates: x = grad u(y), phi_u - phi_v = psi_u(x) - psi_v(x)
    kd = kahler_data(u)
    x = kd.grad_u
    psi_u = np.einsum("qi,qi->q", x, kd.Y) - (u.model.u_ref(kd.Y) + u.values)
    psi_v, _ = conjugate_at(v, x)
    return u.model.mean(np.abs(psi_u - psi_v))


def curve_length(curve, timestamps) -> float:
    """Sum over segments of V^-1 int |Delta u| (piecewise-constant speed)."""
    curve = list(curve)
    ts = np.asarray(timestamps, dtype=float)
    if len(curve) < 2 or len(curve) != len(ts):
        raise ValueError("need at least two samples with matching timestamps")
    if np.any(np.diff(ts) <= 0):
        raise UnsortedTimestamps("timestamps must be strictly increasing")
    m = curve[0].model
    total = 0.0
    for a, b in zip(curve[:-1], curve[1:]):
        if not a.model.same(b.model):
            raise GridMismatch("curve samples live on different grids")
        total += m.mean(np.abs(b.values - a.values))
    return total
