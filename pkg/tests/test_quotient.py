"""Quotient distance against a full LP, J over the torus, properness fits."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import model
from kfl.errors import InsufficientSpread
from kfl.functionals import j_energy
from kfl.model import AffineFunction
from kfl.potentials import quadratic, random_convex
from kfl.quotient import d1_quotient, j_quotient, l1_affine_fit, properness_fit, torus_polar
from kfl.toric_model import torus_act


def _lp_oracle(Y, d, w):
    """min sum w |d - Y b - c| as a dense LP in (b, c, t)."""
    M, n = Y.shape
    Phi = np.c_[Y, np.ones(M)]
    p = n + 1
    cost = np.r_[np.zeros(p), w]
    A = np.block([[Phi, -np.eye(M)], [-Phi, -np.eye(M)]])
    rhs = np.r_[d, -d]
    res = linprog(cost, A_ub=A, b_ub=rhs, bounds=[(None, None)] * p + [(0, None)] * M, method="highs")
    assert res.status == 0
    return res.fun, res.x[:p]


@pytest.mark.parametrize("seed", range(4))
def test_quotient_matches_lp(seed):
    m = model("dP3", 17)
    rng = np.random.default_rng(seed)
    u, v = random_convex(m, rng, scale=2.0), random_convex(m, rng, scale=2.0)
    q = d1_quotient(u, v)
    obj, _ = _lp_oracle(m.grid.points, u.values - v.values, m.grid.weights)
    assert q.value == pytest.approx(obj / m.V, abs=1e-10)


def test_quotient_matches_brute_force_grid():
    # coarse exhaustive search over (b, c) bounds the optimum from above
    m = model("P1", 257)
    rng = np.random.default_rng(7)
    u, v = random_convex(m, rng), random_convex(m, rng)
    d = u.values - v.values
    y = m.grid.points[:, 0]
    bs = np.linspace(-3, 3, 601)
    cs = np.linspace(-3, 3, 601)
    w = m.grid.weights / m.V
    best = min((np.abs(d[None, :] - b * y[None, :] - cs[:, None]) @ w).min() for b in bs)
    q = d1_quotient(u, v).value
    assert q <= best + 1e-12
    assert best - q < 2e-2


def test_fit_with_and_without_intercept():
    rng = np.random.default_rng(0)
    Y = rng.normal(size=(200, 2))
    w = rng.uniform(0.5, 1.5, 200)
    d = Y @ [1.5, -0.5] + 0.25 + rng.laplace(scale=0.1, size=200)
    th, obj, _, _ = l1_affine_fit(Y, d, w)
    ref, th_ref = _lp_oracle(Y, d, w)
    assert obj == pytest.approx(ref, rel=1e-10)
    th0, obj0, _, _ = l1_affine_fit(Y, d, w, intercept=False)
    assert th0.shape == (2,) and obj0 >= obj - 1e-12


@given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1))
def test_orbit_collapses(seed, b0, b1, c):
    m = model("dP3", 17)
    u = random_convex(m, np.random.default_rng(seed), normalize=False)
    g = AffineFunction([b0, b1], c)
    q = d1_quotient(u, torus_act(u, g))
    assert q.value <= 1e-8
    assert np.allclose(q.minimizer.b, [-b0, -b1], atol=1e-6)


def test_fixed_constant_on_normalized_orbit():
    m = model("dP3", 17)
    u = random_convex(m, np.random.default_rng(1))
    v = torus_act(u, AffineFunction([0.5, -1.0]))
    q = d1_quotient(u, v, free_constant=False)
    assert q.value <= 1e-8
    assert np.allclose(q.minimizer.b, [-0.5, 1.0], atol=1e-6)


@given(st.integers(0, 10_000))
def test_quotient_pseudometric(seed):
    m = model("dP3", 17)
    rng = np.random.default_rng(seed)
    u, v, w = (random_convex(m, rng) for _ in range(3))
    assert d1_quotient(u, u).value == 0.0
    a, b = d1_quotient(u, v).value, d1_quotient(v, u).value
    assert a == pytest.approx(b, abs=1e-9)
    assert a <= d1_quotient(u, w).value + d1_quotient(w, v).value + 1e-9


def test_j_quotient_orbit_invariant():
    m = model("dP3", 33)
    u = random_convex(m, np.random.default_rng(2))
    a = j_quotient(u)
    b = j_quotient(torus_act(u, AffineFunction([0.7, -0.3])))
    assert a.value == pytest.approx(b.value, abs=1e-7)
    assert a.value <= j_energy(u)[0] + 1e-12


def test_j_quotient_symmetric_potential():
    m = model("dP3", 33)
    u = quadratic(m, [[2.0, 0.5], [0.5, 1.0]], normalize=True)
    q = j_quotient(u)
    assert np.linalg.norm(q.minimizer.b) < 1e-5


def test_torus_polar():
    k, X = torus_polar([0.1, 2.0], [-1.0, 0.5])
    assert np.allclose(k, [0.1, 2.0]) and np.allclose(X, [-1.0, 0.5])


def test_properness_linear_cloud():
    d = np.geomspace(0.1, 100, 40)
    r = properness_fit(zip(d, 2 * d - 1))
    assert r.C == pytest.approx(2.0, rel=1e-12)
    assert r.D == pytest.approx(1.0, abs=1e-9)
    assert r.verdict == "proper" and r.min_margin >= 0


def test_properness_bounded_functional():
    d = np.geomspace(0.1, 100, 40)
    r = properness_fit(zip(d, np.full_like(d, 0.3)))
    assert r.C == 0.0 and r.verdict == "not-proper"


def test_properness_margins_nonnegative():
    rng = np.random.default_rng(0)
    d = np.geomspace(0.01, 50, 200)
    f = np.sqrt(d) + 0.5 * d - rng.uniform(0, 1, d.size)
    r = properness_fit(zip(d, f))
    assert r.min_margin >= 0
    assert np.all(f - (r.C * d - r.D) >= -1e-12)


def test_properness_insufficient_spread():
    with pytest.raises(InsufficientSpread):
        properness_fit([(1.0, 1.0)] * 5)
    with pytest.raises(InsufficientSpread):
        properness_fit(zip(np.linspace(1, 5, 20), np.linspace(1, 5, 20)))
