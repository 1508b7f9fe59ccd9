"""Principle harness on the toy gallery and on toric models."""
import json

import numpy as np
import pytest

from conftest import model
from kfl.errors import MissingCapability, PreconditionNotMet
from kfl.principle import (TOYS, EuclideanToy, ToricVariationalModel, check_hypotheses, existence_properness_test,
                           geodesic_descent_check)

CHECKED = ("P1", "P4", "P5", "P6", "P7")
EXPECTED_FAIL = {"euclidean": None, "scaled-metric": "P4", "trivial-group": "P5", "tilted-functional": "P7"}


@pytest.mark.parametrize("name", sorted(EXPECTED_FAIL))
def test_toy_gallery(name):
    rep = check_hypotheses(TOYS[name]())
    bad = EXPECTED_FAIL[name]
    for p in CHECKED:
        assert rep.status(p) == ("fail" if p == bad else "pass"), (name, p, rep.results[p])
    assert rep.status("P2") == rep.status("P3") == "skipped"
    assert rep.g_invariance.status == ("fail" if name == "tilted-functional" else "pass")
    if bad:
        assert rep.results[bad].witness is not None


def test_shifted_functional_fails_only_invariance():
    rep = check_hypotheses(TOYS["shifted-functional"]())
    assert rep.status("P7") == "pass" and rep.status("P5") == "skipped"
    assert rep.g_invariance.status == "fail"
    ex = existence_properness_test(TOYS["shifted-functional"]())
    assert ex["verdict"] == "not-G-invariant" and ex["consistent"]


def test_toric_p1_passes():
    rep = check_hypotheses(ToricVariationalModel(model("P1", 1025)))
    for p in CHECKED:
        assert rep.status(p) == "pass", (p, rep.results[p])
    assert rep.g_invariance.status == "pass"


def test_existence_verdicts():
    assert existence_properness_test(EuclideanToy())["verdict"] == "proper"
    r = existence_properness_test(ToricVariationalModel(model("P1", 1025)))
    assert r["verdict"] == "proper" and r["consistent"]
    r = existence_properness_test(ToricVariationalModel(model("dP1", 33)))
    assert r["verdict"] == "not-G-invariant" and r["consistent"]


def test_deterministic_and_budget_extends():
    a = check_hypotheses(EuclideanToy(), budget=100, seed=4).to_json()
    b = check_hypotheses(EuclideanToy(), budget=100, seed=4).to_json()
    assert a == b
    json.loads(a)
    small = check_hypotheses(TOYS["scaled-metric"](), budget=100, seed=1)
    big = check_hypotheses(TOYS["scaled-metric"](), budget=200, seed=1)
    assert big.results["P4"].worst >= small.results["P4"].worst
    assert big.results["P4"].witness == small.results["P4"].witness


def test_budget_floor():
    with pytest.raises(ValueError):
        check_hypotheses(EuclideanToy(), budget=50)


def test_missing_capability():
    class Partial:
        name = "partial"
        basepoint = 0.0

        def distance(self, p, q):
            return abs(p - q)

    with pytest.raises(MissingCapability):
        check_hypotheses(Partial())
    with pytest.raises(MissingCapability):
        existence_properness_test(Partial())


class _BentToy(EuclideanToy):
    name = "bent"

    def geodesic(self, p, q, t):
        return (1 - t) * np.asarray(p) + t * np.asarray(q) + np.array([0.0, 0.5 * np.sin(np.pi * t)])


def test_geodesic_descent_check():
    toy = EuclideanToy()
    assert geodesic_descent_check(toy, np.zeros(2), np.array([0.0, 1.0]))
    assert not geodesic_descent_check(_BentToy(), np.zeros(2), np.array([0.0, 1.0]))
    with pytest.raises(PreconditionNotMet):
        geodesic_descent_check(toy, np.zeros(2), np.array([1.0, 0.0]))


def test_geodesic_descent_toric():
    tm = ToricVariationalModel(model("P1", 257))
    rng = np.random.default_rng(0)
    u = tm.sample(rng)
    y = tm.model.grid.points[:, 0]
    # v - u is even, hence L1-orthogonal to affine functions on the symmetric interval
    v = u.with_values(u.values + (y * y - tm.model.mean(y * y)))
    assert geodesic_descent_check(tm, u, v)
