import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kfl.errors import DegeneratePolytope, NotDelzant, UnboundedPolytope
from kfl.grid import Grid
from kfl.polytope import build_polytope, interval, named


def _shoelace(V):
    x, y = V[:, 0], V[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def test_unit_interval():
    p = build_polytope([([1], 0.0), ([-1], 1.0)])
    assert p.n == 1 and p.volume == pytest.approx(1.0)
    assert np.allclose(sorted(p.vertices[:, 0]), [0, 1])


def test_dp3_hexagon_area_and_vertices():
    p = named("dP3")
    expected = {(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)}
    assert {tuple(np.round(v).astype(int)) for v in p.vertices} == expected
    assert p.volume == pytest.approx(_shoelace(p.vertices)) == pytest.approx(3.0)
    assert p.is_fano and np.allclose(p.barycenter, 0)


def test_dp1_small_trapezoid():
    p = named("dP1-small")
    assert {tuple(np.round(v).astype(int)) for v in p.vertices} == {(0, 0), (2, 0), (1, 1), (0, 1)}
    assert p.volume == pytest.approx(1.5)
    assert not p.is_fano


def test_named_models_fano_and_boundary():
    # boundary measure: each edge length divided by the norm of its primitive normal = lattice length
    for name in ("P2", "dP3", "dP1"):
        p = named(name)
        V = p.vertices
        E = np.roll(V, -1, axis=0) - V
        lattice = np.gcd(np.abs(np.round(E[:, 0])).astype(int), np.abs(np.round(E[:, 1])).astype(int))
        assert p.boundary_measure == pytest.approx(lattice.sum())
        assert p.is_fano
    assert named("P1").boundary_measure == pytest.approx(2.0)


@pytest.mark.parametrize("facets,err", [
    ([([1], 0.0)], UnboundedPolytope),
    ([([1, 0], 0.0), ([0, 1], 0.0), ([1, 1], 0.0)], UnboundedPolytope),
    ([([2], 0.0), ([-1], 1.0)], NotDelzant),
    ([([1, 0], 0.0), ([0, 1], 0.0), ([-1, -2], 2.0)], NotDelzant),
    ([([1], 0.0), ([-1], 0.0)], DegeneratePolytope),
])
def test_invalid_polytopes(facets, err):
    with pytest.raises(err):
        build_polytope(facets)


def test_hash_is_canonical():
    a = build_polytope([([1], 0.0), ([-1], 1.0)])
    b = build_polytope([([-1], 1.0), ([1], 0.0)])
    assert a.hash == b.hash
    assert a.hash != interval(0.0, 2.0).hash


@given(st.sampled_from([((1, 0), (0, 1)), ((1, 1), (0, 1)), ((2, 1), (1, 1)), ((1, -1), (1, 0))]),
       st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_volume_invariant_under_lattice_automorphisms(M, s0, s1):
    """Unimodular maps and translations preserve volume and boundary measure."""
    A = np.array(M, dtype=float)
    assert abs(round(np.linalg.det(A))) == 1
    p = named("dP3")
    # y -> A y + s: facets l.y + c >= 0 become (A^-T l).y' + c - (A^-T l).s >= 0
    Ainv_T = np.linalg.inv(A).T
    s = np.array([s0, s1])
    facets = [(np.round(Ainv_T @ l).astype(int), c - float((Ainv_T @ l) @ s)) for l, c in zip(p.normals, p.offsets)]
    q = build_polytope(facets)
    assert q.volume == pytest.approx(p.volume)
    assert q.boundary_measure == pytest.approx(p.boundary_measure)


@pytest.mark.parametrize("name,N", [("dP3", 33), ("dP1", 65), ("P2", 33), ("P1", 129)])
def test_grid_weights_integrate_affine_exactly(name, N):
    p = named(name)
    g = Grid(p, N)
    assert g.weights.sum() == pytest.approx(p.volume, rel=1e-12)
    first = g.weights @ g.points / p.volume
    assert np.allclose(first, p.barycenter, atol=1e-12)
    assert g.boundary_weights.sum() == pytest.approx(p.boundary_measure, rel=1e-12)
