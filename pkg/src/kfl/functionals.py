"""Energy functionals on toric potentials.

Every functional is evaluated in polytope coordinates.  Two pushforwards of
M appear: the reference measure (reference moment map, variable y') and
omega_phi^n (moment map of u, variable y); both are Lebesgue on P.  The map
T sends y to y' for the same point of M (see ``legendre.kahler_data``).

Gauge: k_energy, ding and the modified functionals vanish at the reference.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp, roots_jacobi

from .errors import DegenerateHessian, EdgeDimensionUnsupported, NonConvergence, NotFano, ParameterOutOfRange
from .legendre import kahler_data
from .model import AffineFunction, SymplecticPotential, ToricModel

# ---------------------------------------------------------------------------
# quadrature helpers


def _lse_mean(model: ToricModel, g: np.ndarray, weights: np.ndarray | None = None) -> float:
    """log( V^-1 sum_k w_k e^{g_k} ) without overflow."""
    w = model.grid.weights if weights is None else weights
    pos = w > 0
    return float(logsumexp(g[pos], b=w[pos]) - math.log(model.V))


def _collar_levels(model: ToricModel) -> tuple[int, int]:
    m = int(math.ceil(np.abs(model.poly.normals).sum(axis=1).max() / 2))
    return 2 * m, 4 * m


def excised_mean(model: ToricModel, values: np.ndarray) -> tuple[float, float]:
    """V^-1 of the integral over P, from the shrunken polytopes {l_i >= k h}
    at two collar widths, linearly extrapolated to zero width.

    Returns (extrapolated mean, |difference of the two collar estimates|).
    """
    k1, k2 = _collar_levels(model)
    g = model.grid
    w1, w2 = g.collar_weights(k1), g.collar_weights(k2)
    v = np.where(w1 > 0, values, 0.0)
    a = float(np.dot(w1, v)) / model.V
    b = float(np.dot(w2, np.where(w2 > 0, values, 0.0))) / model.V
    return 2 * a - b, abs(a - b)


def _fano_point(model: ToricModel, beta: float = 1.0) -> np.ndarray:
    p = model.poly.center_point(beta)
    if p is None:
        raise NotFano(f"{model.poly.name or 'polytope'} has no point with all facet values {beta}")
    return p


# ---------------------------------------------------------------------------
# Ricci potential


@dataclass(frozen=True, eq=False)
class RicciPotential:
    """f with V^-1 int e^f dy' = 1, as an analytic function of y'."""

    model: ToricModel
    beta: float
    const: float
    values: np.ndarray  # at grid nodes (may be +inf at cone points)
    mean: float  # V^-1 int f dy'

    def __call__(self, y) -> np.ndarray:
        return _f_shape(self.model, self.beta, np.asarray(y, float)) + self.const


def _f_shape(model: ToricModel, beta: float, y: np.ndarray) -> np.ndarray:
    ell = model.poly.ell(y)
    out = model.log_q(y) - ell.sum(axis=-1)
    if beta != 1.0:
        with np.errstate(divide="ignore"):
            out = out + (beta - 1.0) * np.log(np.maximum(ell, 0.0)).sum(axis=-1)
    return out


def ricci_potential(model: ToricModel, beta: float = 1.0) -> RicciPotential:
    """Ricci potential of the reference metric (with cone weights when beta < 1)."""
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise ParameterOutOfRange("beta must lie in (0, 1]")
    if beta < 1.0 and model.n != 1:
        raise EdgeDimensionUnsupported("cone angles below 2 pi are supported for n = 1 only")
    cache = model.__dict__.setdefault("_ricci", {})
    if beta in cache:
        return cache[beta]
    _fano_point(model, beta)
    g = model.grid
    if beta == 1.0:
        shape = _f_shape(model, 1.0, g.points)
        const = -_lse_mean(model, shape)
        mean = model.mean(shape) + const
    else:
        # e^{f} = const * prod l_i^(beta-1) on an interval of length 2 beta;
        # Gauss-Jacobi absorbs the endpoint singularities exactly
        a, b = g.poly.vertices[0, 0], g.poly.vertices[1, 0]
        x, wq = roots_jacobi(64, beta - 1.0, beta - 1.0)
        y = a + (b - a) * (x + 1) / 2
        scale = ((b - a) / 2) ** (2 * beta - 1)
        smooth = _f_shape(model, beta, y[:, None]) - (beta - 1.0) * np.log(model.poly.ell(y[:, None])).sum(-1)
        const = -(logsumexp(smooth, b=wq * scale) - math.log(model.V))
        # mean of f: y = a + (b-a)(1 - cos(pi z))/2 tames the log singularities
        zz = np.linspace(0, 1, 4001)[1:-1]
        yq = a + (b - a) * (1 - np.cos(np.pi * zz)) / 2
        jac = (b - a) * np.pi * np.sin(np.pi * zz) / 2
        fq = _f_shape(model, beta, yq[:, None]) + const
        mean = float(np.sum(fq * jac) * (zz[1] - zz[0]) / model.V)
        shape = _f_shape(model, beta, g.points)
    rp = RicciPotential(model, beta, float(const), shape + const, float(mean))
    cache[beta] = rp
    return rp


# ---------------------------------------------------------------------------
# basic energies


def am(u: SymplecticPotential) -> float:
    return -u.model.mean(u.values)


def _phi_means(u: SymplecticPotential) -> tuple[float, float]:
    kd = kahler_data(u)
    return u.model.mean(kd.phi_ref), u.model.mean(kd.phi_T)


def j_energy(u: SymplecticPotential) -> tuple[float, float, float]:
    """(J, I, I - J)."""
    a, b = _phi_means(u)
    A = am(u)
    J = a - A
    I = a - b
    return J, I, I - J


def sup_phi(u: SymplecticPotential) -> float:
    """sup over M of the Kähler potential (= -min of the stored deviation)."""
    return float(-np.min(u.values))


def green_gap(u: SymplecticPotential) -> float:
    """sup phi - V^-1 int phi omega^n."""
    return sup_phi(u) - _phi_means(u)[0]


def _hess_logdet_ratio(u: SymplecticPotential) -> np.ndarray:
    """log det D^2 u - log det D^2 u_G at every node (one-sided stencils at the rim)."""
    cache = u.__dict__.get("_ldr")
    if cache is not None:
        return cache
    model = u.model
    Hw = u.derivatives[1]
    Ginv = model.inv_hess_ref(model.grid.points)
    Mx = np.eye(model.n) + Ginv @ Hw
    sign, ld = np.linalg.slogdet(Mx)
    inner = model.grid.ell.min(axis=1) > 0
    ld_u = ld + model.logdet_hess_ref(model.grid.points)
    bad = inner & ((sign <= 0) | (ld_u < math.log(1e-12)))
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise DegenerateHessian(f"Hessian determinant not positive at y = {model.grid.points[k].tolist()}")
    ld = np.where(sign > 0, ld, 0.0)
    u.__dict__["_ldr"] = ld
    return ld


def _entropy_density(u: SymplecticPotential) -> np.ndarray:
    model = u.model
    kd = kahler_data(u)
    ld_T = model.log_q(kd.T) - kd.logL_T.sum(axis=1)
    return ld_T - model.logdet_hess_ref(kd.Y) - _hess_logdet_ratio(u)


def entropy(u: SymplecticPotential, extrapolate: bool = False) -> float:
    """Relative entropy of omega_phi^n with respect to omega^n (normalised)."""
    dens = _entropy_density(u)
    if extrapolate:
        return excised_mean(u.model, dens)[0]
    return u.model.mean(dens)


def k_energy_boundary(u: SymplecticPotential, extrapolate: bool = False) -> float:
    """-int log det(D^2u / D^2u_G) + int_dP w dsigma - a int w, a = sigma(dP)/Vol(P), over V."""
    model = u.model
    g = model.grid
    a = model.poly.boundary_measure / model.poly.volume
    ld = _hess_logdet_ratio(u)
    if extrapolate:
        bulk = excised_mean(model, -ld)[0]
    else:
        bulk = model.mean(-ld)
    return bulk + float(np.dot(g.boundary_weights, u.values)) / model.V - a * model.mean(u.values)


def k_energy_log(u: SymplecticPotential, extrapolate: bool = False) -> float:
    """Entropy-plus-Ricci route on a Fano model, with the reference gauge."""
    model = u.model
    rp = ricci_potential(model, 1.0)
    kd = kahler_data(u)
    dens = _entropy_density(u) - rp(kd.T) + kd.phi_T + u.values
    val = excised_mean(model, dens)[0] if extrapolate else model.mean(dens)
    return val + rp.mean


def k_energy(u: SymplecticPotential, route: str = "auto", extrapolate: bool = False) -> float:
    """Mabuchi K-energy normalised to vanish at the reference.

    ``route``: "log" (entropy + Ricci terms, Fano models only), "boundary"
    (toric boundary formula) or "auto" (log when Fano, else boundary).
    """
    if route == "auto":
        route = "log" if u.model.fano_flag else "boundary"
    if route == "log":
        return k_energy_log(u, extrapolate)
    if route == "boundary":
        return k_energy_boundary(u, extrapolate)
    raise ValueError(f"unknown route {route!r}")


def e_beta(u: SymplecticPotential) -> float:
    """K-energy in the gauge where E(0) = -V^-1 int f omega^n (beta = 1)."""
    return k_energy(u) - ricci_potential(u.model, 1.0).mean


# ---------------------------------------------------------------------------
# Ding


def _phi_at(u: SymplecticPotential, y: np.ndarray) -> np.ndarray:
    kd = kahler_data(u)
    return u.grid.interpolate(kd.phi_ref, y)


def _ding_exponent(u: SymplecticPotential) -> np.ndarray:
    """log density of e^{f - phi} omega^n against dy, in the moment coordinates of u.

    The pull-back to u's own coordinates is smooth up to the rim, unlike
    phi at the reference nodes, which jumps in a sub-grid boundary layer
    when grad u is much steeper than grad u_G.
    """
    model = u.model
    p = _fano_point(model)
    rp = ricci_potential(model, 1.0)
    gw = u.derivatives[0]
    y = model.grid.points
    return rp.values + _hess_logdet_ratio(u) - np.einsum("qi,qi->q", gw, y - p) + u.values


def _ding_log_integral(u: SymplecticPotential, route: str = "moment") -> float:
    """log V^-1 int e^{f - phi} omega^n."""
    if route == "moment":
        return _lse_mean(u.model, _ding_exponent(u))
    if route == "reference":
        kd = kahler_data(u)
        return _lse_mean(u.model, ricci_potential(u.model, 1.0).values - kd.phi_ref)
    raise ValueError(f"unknown route {route!r}")


def ding(u: SymplecticPotential, beta: float = 1.0, route: str = "moment") -> float:
    """-AM - log V^-1 int e^{f - phi} omega^n.

    ``route="reference"`` integrates at the reference nodes instead; it needs
    no derivatives of u but loses accuracy for steep potentials.
    """
    model = u.model
    rp = ricci_potential(model, beta)
    if beta == 1.0:
        return -am(u) - _ding_log_integral(u, route)
    a, b = model.poly.vertices[0, 0], model.poly.vertices[1, 0]
    x, wq = roots_jacobi(64, beta - 1.0, beta - 1.0)
    y = (a + (b - a) * (x + 1) / 2)[:, None]
    scale = ((b - a) / 2) ** (2 * beta - 1)
    smooth = rp(y) - (beta - 1.0) * np.log(model.poly.ell(y)).sum(-1)
    g = smooth - _phi_at(u, y)
    return -am(u) - float(logsumexp(g, b=wq * scale) - math.log(model.V))


def ricci_potential_of(u: SymplecticPotential) -> np.ndarray:
    """Ricci potential f_phi of omega_phi at each node y (moment map of u),
    normalised by V^-1 int e^{f_phi} dy = 1."""
    raw = _ding_exponent(u)
    return raw - _lse_mean(u.model, raw)


def ding_tian_residual(u: SymplecticPotential) -> float:
    """e_beta(u) - (F(u) - V^-1 int f_phi omega_phi^n)."""
    fphi = ricci_potential_of(u)
    return e_beta(u) - (ding(u) - u.model.mean(fphi))


# ---------------------------------------------------------------------------
# soliton data


def psi_x(model: ToricModel, b) -> AffineFunction:
    """Moment-map potential <b, y> + c with V^-1 int e^{<b,y>+c} dy = 1."""
    b = np.broadcast_to(np.asarray(b, float), (model.n,)).copy()
    if not np.any(b):
        return AffineFunction(b, 0.0)
    lin = model.grid.points @ b
    return AffineFunction(b, -_lse_mean(model, lin))


def psi_x_bound(model: ToricModel, theta: AffineFunction) -> float:
    return float(np.max(np.abs(theta(model.poly.vertices))))


def am_x(u: SymplecticPotential, b) -> float:
    th = psi_x(u.model, b)
    return -u.model.mean(u.values * np.exp(th(u.grid.points)))


def soliton_functionals(u: SymplecticPotential, b) -> tuple[float, float, float]:
    """(F^X, E^X, C) with E^X >= F^X - C."""
    model = u.model
    th = psi_x(model, b)
    rp = ricci_potential(model, 1.0)
    y = model.grid.points
    ft = -am_x(u, b) - _ding_log_integral(u)
    eth = np.exp(th(y))
    C = -model.mean((rp.values - th(y)) * eth)
    fphi = ricci_potential_of(u)
    ex = ft - C - model.mean((fphi - th(y)) * eth)
    return ft, ex, C


def modified_ding(u: SymplecticPotential, b) -> float:
    return -am_x(u, b) - _ding_log_integral(u)


def soliton_field(model: ToricModel, tol: float = 1e-10, maxit: int = 100) -> np.ndarray:
    """b with weighted barycenter V^-1 int (y - p) e^{<b, y - p>} dy = 0 (Newton)."""
    p = _fano_point(model)
    g = model.grid
    Y = g.points - p
    w = g.weights
    b = np.zeros(model.n)
    res = np.inf
    for _ in range(maxit):
        s = Y @ b
        e = w * np.exp(s - s.max())
        Z = e.sum()
        mu = (e @ Y) / Z
        res = float(np.linalg.norm(mu))
        if res <= tol:
            return b
        cov = (Y - mu).T @ ((Y - mu) * e[:, None]) / Z
        step = np.linalg.solve(cov, -mu)
        # backtrack on the convex objective log int e^{<b, y - p>}
        obj = math.log(Z) + s.max()
        t = 1.0
        while t > 1e-8:
            s2 = Y @ (b + t * step)
            if math.log((w * np.exp(s2 - s2.max())).sum()) + s2.max() <= obj + 1e-4 * t * float(mu @ step):
                break
            t *= 0.5
        b = b + t * step
    raise NonConvergence(f"soliton field Newton did not converge (residual {res:.3e})")


# ---------------------------------------------------------------------------
@dataclass
class EnergyReport:
    am: float | None = None
    j: float | None = None
    i: float | None = None
    i_minus_j: float | None = None
    entropy: float | None = None
    k_energy: float | None = None
    k_energy_route: str | None = None
    ding: float | None = None
    modified_ding: float | None = None
    modified_k_energy: float | None = None
    beta: float = 1.0
    soliton_b: list | None = None
    grid_resolution: list = field(default_factory=list)
    extrapolated: bool = False
    gauge: str = "vanishes at the reference potential"

    def to_dict(self) -> dict:
        return asdict(self)

    def check(self, tol: float = 1e-8) -> list[str]:
        """Violated structural inequalities (empty when consistent)."""
        bad = []
        if self.j is not None and self.j < -tol:
            bad.append("J < 0")
        if self.i is not None and self.j is not None:
            n = len(self.grid_resolution)
            if self.i_minus_j < -tol or self.i_minus_j > n / (n + 1) * self.i + tol:
                bad.append("I - J outside [0, n/(n+1) I]")
        return bad


def energy_report(u: SymplecticPotential, beta: float = 1.0, soliton: bool = False, extrapolate: bool = False) -> EnergyReport:
    model = u.model
    r = EnergyReport(beta=beta, grid_resolution=list(model.grid.shape), extrapolated=extrapolate)
    r.am = am(u)
    r.j, r.i, r.i_minus_j = j_energy(u)
    r.entropy = entropy(u, extrapolate)
    r.k_energy_route = "log" if model.fano_flag else "boundary"
    r.k_energy = k_energy(u, extrapolate=extrapolate)
    if model.fano_flag or (beta < 1 and model.n == 1):
        r.ding = ding(u, beta)
        if soliton and model.fano_flag:
            b = soliton_field(model)
            r.soliton_b = [float(v) for v in b]
            r.modified_ding, r.modified_k_energy, _ = soliton_functionals(u, b)
    return r
