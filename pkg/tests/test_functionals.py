"""Energy functionals against closed forms and independent 1-D quadrature."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from conftest import model
from kfl.errors import DegenerateHessian, EdgeDimensionUnsupported, NotFano, ParameterOutOfRange
from kfl.functionals import (am, am_x, ding, ding_tian_residual, e_beta, energy_report, entropy, green_gap, j_energy,
                             k_energy, psi_x, psi_x_bound, ricci_potential, soliton_field, soliton_functionals)
from kfl.model import AffineFunction, SymplecticPotential, ToricModel
from kfl.polytope import interval
from kfl.potentials import quadratic, random_convex
from kfl.toric_model import geodesic, torus_act

# deviation w = A y^2 + B y on P1 = [-1, 1]; u_G = (1+y)log(1+y) + (1-y)log(1-y)
A, B = 0.3, 0.2


def _p1(N=4097, a=A, b=B):
    m = model("P1", N)
    y = m.grid.points[:, 0]
    return SymplecticPotential(m, a * y**2 + b * y)


def _upp(y, a=A):
    return 2 / (1 - y * y) + 2 * a


def _up(y, a=A, b=B):
    return math.log((1 + y) / (1 - y)) + 2 * a * y + b


def _ent_oracle(a=A, b=B):
    # T = tanh(u'/2) solves u_G'(T) = u'(y); u_G''(T) = 2 / (1 - T^2)
    def dens(y):
        T = math.tanh(_up(y, a, b) / 2)
        return math.log(2 / (1 - T * T)) - math.log(_upp(y, a))
    return quad(dens, -1, 1, limit=200)[0] / 2


def _k_oracle(a=A, b=B):
    # -int log(u''/u_G'') + boundary values of w - (sigma/V) int w, all over V = 2
    bulk = quad(lambda y: -math.log(_upp(y, a) / (2 / (1 - y * y))), -1, 1, limit=200)[0]
    w = lambda y: a * y * y + b * y  # noqa: E731
    return (bulk + w(1) + w(-1) - quad(w, -1, 1)[0]) / 2


def _psi(x, a=A, b=B):
    """Conjugate of u at x by a scalar root solve."""
    y = brentq(lambda t: _up(t, a, b) - x, -1 + 1e-15, 1 - 1e-15, xtol=1e-15)
    uG = (1 + y) * math.log(1 + y) + (1 - y) * math.log(1 - y)
    return x * y - uG - a * y * y - b * y


def _j_oracle(a=A, b=B):
    # phi(x) = psi_u(x) - psi_G(x), reference measure psi_G'' dx with psi_G = 2 log cosh(x/2)
    def f(x):
        return (_psi(x, a, b) - 2 * math.log(math.cosh(x / 2))) * 0.5 / math.cosh(x / 2) ** 2
    mean_phi = quad(f, -30, 30, limit=400, points=[0])[0] / 2
    AM = -quad(lambda y: a * y * y + b * y, -1, 1)[0] / 2
    return mean_phi - AM


def test_am_closed_form():
    m = model("unit", 4097)
    y = m.grid.points[:, 0]
    u = SymplecticPotential(m, (y - 0.5) ** 2)
    assert am(u) == pytest.approx(-1 / 12, abs=1e-7)
    assert am(m.zero()) == 0.0
    assert am(u.with_values(u.values - 0.4)) == pytest.approx(am(u) + 0.4, abs=1e-14)


def test_am_monotone(rng):
    m = model("dP3", 33)
    u = random_convex(m, rng, normalize=False)
    v = u.with_values(u.values + np.abs(rng.normal(size=u.values.size)))
    assert am(v) <= am(u)


def test_j_and_i_basic():
    m = model("P1", 4097)
    assert np.allclose(j_energy(m.zero()), 0, atol=1e-12)
    u = _p1()
    J, I, IJ = j_energy(u)
    Jc, _, _ = j_energy(u.with_values(u.values + 0.7))
    assert Jc == pytest.approx(J, abs=1e-10)
    assert J == pytest.approx(_j_oracle(), rel=1e-5)
    # in one dimension J = I / 2 exactly
    assert IJ == pytest.approx(0.5 * I, rel=1e-6)


def test_j_two_ways_on_normalized():
    u = _p1().normalize()
    J = j_energy(u)[0]
    from kfl.legendre import kahler_data

    assert J == pytest.approx(u.model.mean(kahler_data(u).phi_ref), abs=1e-12)


def test_am_dual_route_in_one_dimension():
    # for n = 1, AM = (mean phi omega + mean phi omega_phi) / 2
    from kfl.legendre import kahler_data

    u = _p1()
    kd = kahler_data(u)
    m = u.model
    assert am(u) == pytest.approx(0.5 * (m.mean(kd.phi_ref) + m.mean(kd.phi_T)), abs=1e-7)


def test_entropy_against_quadrature():
    assert entropy(_p1().model.zero()) == pytest.approx(0.0, abs=1e-12)
    assert entropy(_p1()) == pytest.approx(_ent_oracle(), abs=1e-6)


def test_entropy_extrapolated_route_close():
    m = model("unit", 4097)
    y = m.grid.points[:, 0]
    u = SymplecticPotential(m, 0.1 * (y - 0.5) ** 2)
    a, b = entropy(u), entropy(u, extrapolate=True)
    assert abs(a - b) <= 1e-3 * abs(a)


@pytest.mark.parametrize("route", ["log", "boundary"])
def test_k_energy_against_quadrature(route):
    assert k_energy(_p1().model.zero(), route=route) == pytest.approx(0.0, abs=1e-12)
    assert k_energy(_p1(), route=route) == pytest.approx(_k_oracle(), abs=1e-6)


def test_k_energy_steep_potentials_routes_agree():
    m = model("P1", 16385)
    y = m.grid.points[:, 0]
    u = SymplecticPotential(m, 10 * y**4).normalize()
    assert k_energy(u, route="log") == pytest.approx(k_energy(u, route="boundary"), rel=1e-6)
    assert k_energy(u) == pytest.approx(_k_oracle_poly4(10.0), rel=1e-6)


def _k_oracle_poly4(s):
    upp = lambda y: 2 / (1 - y * y) + 12 * s * y * y  # noqa: E731
    bulk = quad(lambda y: -math.log(upp(y) * (1 - y * y) / 2), -1, 1, limit=200)[0]
    return (bulk + 2 * s - quad(lambda y: s * y**4, -1, 1)[0]) / 2


def test_k_energy_dp3_orbit_invariant():
    m = model("dP3", 65)
    z = m.zero()
    E = [k_energy(torus_act(z, AffineFunction([t, 0.0]))) for t in (0.0, 1.0, 2.0)]
    assert max(abs(e) for e in E) < 1e-6


def test_futaki_on_dp1():
    from kfl.experiments import futaki_oracle

    m = model("dP1", 65)
    z = m.zero()
    h = 0.05
    d = (k_energy(torus_act(z, AffineFunction([h, h]))) - k_energy(torus_act(z, AffineFunction([-h, -h])))) / (2 * h)
    assert futaki_oracle(m.poly, [1, 1]) == pytest.approx(1 / 6, rel=1e-12)
    assert d == pytest.approx(1 / 6, rel=1e-4)


def test_ricci_potential_of_fubini_study_vanishes():
    rp = ricci_potential(model("P1", 4097), 1.0)
    assert np.max(np.abs(rp.values)) < 1e-12


@pytest.mark.parametrize("name", ["dP3", "dP1", "P2"])
def test_ricci_potential_normalized(name):
    m = model(name, 65)
    rp = ricci_potential(m, 1.0)
    assert m.mean(np.exp(rp.values)) == pytest.approx(1.0, abs=1e-12)


def test_cone_angle_normalization_against_weighted_quadrature():
    beta = 0.5
    m = ToricModel(interval(-0.5, 0.5), 4097)
    rp = ricci_potential(m, beta)
    # e^f has integrable singularities l^(beta-1) at both ends: let quad absorb them
    def g(y):
        y = min(max(y, -0.5 + 1e-15), 0.5 - 1e-15)
        return math.exp(rp(np.array([[y]]))[0]) * ((y + 0.5) * (0.5 - y)) ** (1 - beta)

    val = quad(g, -0.5, 0.5, weight="alg", wvar=(beta - 1, beta - 1))[0]
    assert val / m.V == pytest.approx(1.0, abs=1e-8)


def test_beta_errors():
    with pytest.raises(ParameterOutOfRange):
        ricci_potential(model("P1", 65), 1.5)
    with pytest.raises(EdgeDimensionUnsupported):
        ricci_potential(model("dP3", 17), 0.5)
    with pytest.raises(NotFano):
        ricci_potential(model("P1", 65), 0.5)  # length 2 is not 2 beta
    with pytest.raises(NotFano):
        ricci_potential(model("unit", 65), 1.0)


def test_degenerate_hessian():
    m = model("P1", 257)
    # u = u_G + w with w = -u_G + y^3-free affine part: D^2 u = 0 inside
    flat = SymplecticPotential(m, -m.uG + 0.1 * m.grid.points[:, 0])
    with pytest.raises(DegenerateHessian):
        entropy(flat)


def test_ding_reference_and_tian_identity():
    assert ding(model("P1", 4097).zero()) == pytest.approx(0.0, abs=1e-12)
    u = _p1()
    assert abs(ding_tian_residual(u)) < 1e-6


@pytest.mark.parametrize("a,b", [(A, B), (0.0, 0.5), (3.0, 0.0)])
def test_ding_against_quadrature(a, b):
    # e^{f - phi} omega = e^{-psi_u} dx / 4 on P1 (normalised so that u_G gives 1)
    def wfun(y):
        return (3.0 * y**4 + 0.5 * y) if a == 3.0 else a * y * y + b * y

    m = model("P1", 16385)
    y = m.grid.points[:, 0]
    u = SymplecticPotential(m, wfun(y))
    if a == 3.0:
        def up(t):
            return math.log((1 + t) / (1 - t)) + 12 * t**3 + 0.5

        def psi(x):
            t = brentq(lambda s: up(s) - x, -1 + 1e-15, 1 - 1e-15, xtol=1e-15)
            return x * t - ((1 + t) * math.log(1 + t) + (1 - t) * math.log(1 - t)) - wfun(t)
    else:
        def psi(x):
            return _psi(x, a, b)
    Z = quad(lambda x: math.exp(-psi(x)), -30, 30, limit=400, points=[0])[0] / 4
    AM = -quad(wfun, -1, 1)[0] / 2
    assert ding(u) == pytest.approx(-AM - math.log(Z), abs=1e-6)


def test_ding_routes_agree_on_mild_potentials():
    u = _p1(16385)
    assert ding(u, route="reference") == pytest.approx(ding(u), abs=1e-6)


def test_ding_grid_stable():
    vals = [ding(_p1(N, 0.3, 0.0)) for N in (16385, 65537)]
    assert abs(vals[0] - vals[1]) < 1e-4


def test_ding_cone_angle_reference():
    m = ToricModel(interval(-0.5, 0.5), 2049)
    assert ding(m.zero(), 0.5) == pytest.approx(0.0, abs=1e-10)


@given(st.integers(0, 10_000), st.floats(0.05, 3.0))
def test_jensen_e_above_f(seed, scale):
    m = model("P1", 2049)
    u = random_convex(m, np.random.default_rng(seed), scale=scale)
    assert e_beta(u) - ding(u) >= -1e-8


@given(st.integers(0, 10_000), st.floats(0.05, 3.0))
def test_aubin_sandwich(seed, scale):
    m = model("dP3", 33)
    J, I, IJ = j_energy(random_convex(m, np.random.default_rng(seed), scale=scale))
    assert J >= -1e-12
    assert -1e-12 <= IJ <= 2 / 3 * I + 1e-12


@given(st.integers(0, 10_000), st.floats(0.05, 3.0))
def test_entropy_nonnegative(seed, scale):
    m = model("dP3", 33)
    assert entropy(random_convex(m, np.random.default_rng(seed), scale=scale)) >= -1e-8


def test_green_gap_nonnegative(rng):
    m = model("dP3", 33)
    for _ in range(5):
        u = random_convex(m, rng)
        assert green_gap(u) >= 0


def test_psi_x():
    m = model("unit", 65537)
    assert psi_x(m, [0.0]).c == 0.0
    assert psi_x(m, [1.0]).c == pytest.approx(-math.log(math.e - 1), abs=1e-9)
    d = model("dP3", 65)
    th = psi_x(d, [2.0, 0.0])
    assert psi_x_bound(d, th) <= 2 + abs(th.c) + 1e-12


def test_am_x():
    m = model("unit", 65537)
    y = m.grid.points[:, 0]
    u = SymplecticPotential(m, y - 0.5)
    assert am_x(u, [0.0]) == pytest.approx(am(u), abs=1e-15)
    assert am_x(m.zero(), [1.0]) == 0.0
    c = -math.log(math.e - 1)
    oracle = -quad(lambda t: (t - 0.5) * math.exp(t + c), 0, 1)[0]
    assert am_x(u, [1.0]) == pytest.approx(oracle, abs=1e-9)


def test_am_x_sandwich(rng):
    m = model("dP3", 33)
    b = np.array([0.7, -0.4])
    th = psi_x(m, b)
    C = math.exp(psi_x_bound(m, th))
    v = random_convex(m, rng)
    w = v.with_values(v.values - np.abs(rng.normal(size=v.values.size)))
    # w <= v on the Kahler side means u_w >= u_v on the symplectic side
    d_am = am(w) - am(v)
    d_amx = am_x(w, b) - am_x(v, b)
    assert d_am / C - 1e-12 <= d_amx <= C * d_am + 1e-12


def test_soliton_functionals_reduce_at_zero():
    # E^0 is K-energy through a different discretization: agreement is O(h^2)
    m = model("dP3", 257)
    y = m.grid.points
    u = SymplecticPotential(m, 0.3 * y[:, 0] ** 2 + 0.2 * y[:, 0] * y[:, 1] + 0.1 * y[:, 1] ** 4)
    F, E, C = soliton_functionals(u, [0.0, 0.0])
    assert F == pytest.approx(ding(u), abs=1e-12)
    assert E == pytest.approx(k_energy(u), abs=1e-4)


def test_modified_inequality(rng):
    m = model("dP1", 33)
    b = soliton_field(m)
    for _ in range(10):
        F, E, C = soliton_functionals(random_convex(m, rng), b)
        assert E >= F - C - 1e-8


def test_soliton_field():
    for name, N in (("P1", 4097), ("dP3", 65), ("P2", 65)):
        assert np.linalg.norm(soliton_field(model(name, N))) <= 1e-8
    b = soliton_field(model("dP1", 65))
    assert np.linalg.norm(b) > 0.1 and b[0] == pytest.approx(b[1], abs=1e-10)
    with pytest.raises(NotFano):
        soliton_field(model("unit", 65))


def test_energy_report(rng):
    m = model("dP3", 33)
    r = energy_report(random_convex(m, rng), soliton=True)
    assert r.check() == []
    d = r.to_dict()
    assert d["k_energy_route"] == "log" and d["soliton_b"] == [0.0, 0.0]


def test_k_energy_convex_along_geodesic(rng):
    m = model("dP3", 33)
    u0, u1 = random_convex(m, rng), random_convex(m, rng)
    E = np.array([k_energy(geodesic(u0, u1, t)) for t in np.linspace(0, 1, 11)])
    assert np.min(E[:-2] - 2 * E[1:-1] + E[2:]) >= -1e-4 * max(1.0, np.abs(E).max())


def test_quadratic_family_matches_oracle():
    m = model("P1", 4097)
    u = quadratic(m, [[2 * A]], [B])
    assert k_energy(u) == pytest.approx(_k_oracle(), abs=1e-6)
