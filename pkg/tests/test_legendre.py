import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import model
from kfl.errors import GridTooCoarse, NonConvexInput
from kfl.legendre import (BoxFunction, box, conjugate_at, convex_envelope_points, dual_rooftop_check, kahler_data,
                          legendre_transform)
from kfl.model import SymplecticPotential
from kfl.potentials import random_convex


def _brute_sup(fy, Y, X):
    return (X[:, None] * Y[None, :] - fy[None, :]).max(axis=1)


def test_self_dual_quadratic():
    axes = box(1, -4, 4, 4001)
    f = BoxFunction(axes, 0.5 * axes[0] ** 2)
    g = legendre_transform(f, "to_dual", target=box(1, -2, 2, 81))
    x = g.axes[0]
    assert np.allclose(g.values, 0.5 * x**2, atol=1e-6)


def test_self_dual_quadratic_2d():
    axes = box(2, -3, 3, 241)
    Y = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    f = BoxFunction(axes, 0.5 * (Y**2).sum(-1))
    g = legendre_transform(f, "to_dual", target=box(2, -1, 1, 21))
    X = g.points
    assert np.allclose(g.values.ravel(), 0.5 * (X**2).sum(1), atol=1e-3)


def test_fubini_study_on_unit_interval():
    m = model("unit", 4097)
    psi = legendre_transform(m.zero(), "to_primal", target=box(1, -6, 6, 121))
    x = psi.axes[0]
    Y = np.linspace(0, 1, 200001)
    with np.errstate(divide="ignore", invalid="ignore"):
        uG = np.nan_to_num(Y * np.log(Y)) + np.nan_to_num((1 - Y) * np.log(1 - Y))
    # grid maximum: error at most h^2 u''/8 with u'' ~ 1/y near the ends
    assert np.allclose(psi.values, _brute_sup(uG, Y, x), atol=1e-5)
    assert np.allclose(psi.values, np.logaddexp(0, x), atol=1e-5)
    assert psi(np.array([[0.0]]))[0] == pytest.approx(np.log(2), abs=1e-6)


def test_fubini_study_on_anticanonical_interval():
    m = model("P1", 4097)
    x = np.linspace(-5, 5, 41)[:, None]
    vals, _ = conjugate_at(m.zero(), x)
    assert np.allclose(vals, 2 * np.log(np.cosh(x[:, 0] / 2)), atol=1e-6)


def test_round_trip_recovers_potential(rng):
    m = model("P1", 2049)
    u = random_convex(m, rng, scale=0.5)
    psi = legendre_transform(u, "to_primal", target=box(1, -25, 25, 20001))
    back = legendre_transform(psi, "to_dual", target=m)
    inner = m.grid.ell.min(axis=1) > 0.05
    assert np.allclose(back.values[inner], u.values[inner], atol=2e-4)


def test_clipping_raises():
    axes = box(1, -1, 1, 201)
    f = BoxFunction(axes, 0.5 * axes[0] ** 2)
    with pytest.raises(GridTooCoarse):
        legendre_transform(f, "to_dual", target=box(1, -3, 3, 31))


def test_nonconvex_box_input():
    axes = box(1, -2, 2, 401)
    f = BoxFunction(axes, np.cos(3 * axes[0]) + axes[0] ** 2)
    with pytest.raises(NonConvexInput):
        legendre_transform(f, "to_dual", target=box(1, -1, 1, 11), strict=True)
    with pytest.warns(UserWarning):
        g = legendre_transform(f, "to_dual", target=box(1, -1, 1, 11))
    assert g.convexified
    # conjugate of the envelope equals the conjugate of f itself
    assert np.allclose(g.values, _brute_sup(f.values, axes[0], g.axes[0]), atol=1e-12)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=30), st.integers(0, 1000))
def test_convex_envelope_points_1d(vals, seed):
    f = np.array(vals)
    P = np.sort(np.random.default_rng(seed).uniform(0, 1, len(f)))
    P += np.arange(len(f)) * 1e-6
    env = convex_envelope_points(P, f)
    assert np.all(env <= f + 1e-12)
    s = np.diff(env) / np.diff(P)
    assert np.all(np.diff(s) >= -1e-6 * (1 + np.abs(s[1:]).max(initial=0)))


def test_convex_envelope_points_2d(rng):
    P = rng.uniform(-1, 1, size=(400, 2))
    f = (P**2).sum(1) + 0.3 * np.sin(4 * P[:, 0])
    env = convex_envelope_points(P, f)
    assert np.all(env <= f + 1e-12)
    # the envelope is the largest convex minorant: compare with brute-force LP dual on a few points
    from scipy.optimize import linprog

    for k in rng.choice(400, 5, replace=False):
        # min sum lam_j f_j s.t. sum lam_j P_j = P_k, sum lam = 1, lam >= 0
        A = np.vstack([P.T, np.ones(400)])
        res = linprog(f, A_eq=A, b_eq=np.r_[P[k], 1.0], bounds=(0, None), method="highs")
        assert env[k] == pytest.approx(res.fun, abs=1e-9)


def test_kahler_data_of_reference():
    m = model("dP3", 65)
    kd = kahler_data(m.zero())
    assert np.max(np.abs(kd.phi_ref)) < 1e-10
    assert np.max(np.abs(kd.phi_T)) < 1e-6
    assert np.allclose(kd.T, kd.Y, atol=1e-9)


def test_kahler_data_shift_and_orbit(rng):
    """A constant c in u is -c in phi; an affine term moves only the moment map."""
    m = model("dP3", 65)
    u = random_convex(m, rng, scale=0.5)
    kd = kahler_data(u)
    kc = kahler_data(u.with_values(u.values + 0.3))
    assert np.allclose(kc.phi_ref, kd.phi_ref - 0.3, atol=1e-12)
    assert np.allclose(kc.phi_T, kd.phi_T - 0.3, atol=1e-12)


def test_dual_rooftop_agrees(rng):
    m = model("dP3", 65)
    u = random_convex(m, rng, scale=0.5)
    v = random_convex(m, rng, scale=0.5)
    assert dual_rooftop_check(u, v, R=5.0, N=129) < 5e-2
