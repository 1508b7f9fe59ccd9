"""Sampled checks of the existence/properness principle on pluggable models.

A model supplies a pseudometric space with geodesics, a group action and a
functional.  ``check_hypotheses`` tests properties P1, P4, P5, P6 and P7 on
random samples; P2 (compactness of minimizing sequences) and P3
(regularity of minimizers) have no finite surrogate and are always
reported as skipped.  Every "pass" means "no violation among N samples".
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Protocol, runtime_checkable

import numpy as np

from .errors import MissingCapability, PreconditionNotMet
from .quotient import properness_fit

PROPERTIES = ("P1", "P2", "P3", "P4", "P5", "P6", "P7")
REQUIRED = ("sample", "distance", "geodesic", "act", "group_sample", "functional", "basepoint", "quotient")


@runtime_checkable
class VariationalModel(Protocol):
    name: str
    basepoint: Any

    def sample(self, rng: np.random.Generator) -> Any: ...
    def distance(self, p, q) -> float: ...
    def geodesic(self, p, q, t: float) -> Any: ...
    def act(self, g, p) -> Any: ...
    def group_sample(self, rng: np.random.Generator) -> Any: ...
    def functional(self, p) -> float: ...
    def quotient(self, p, q) -> tuple[float, Any]: ...


def _require(model) -> None:
    missing = [c for c in REQUIRED if not hasattr(model, c)]
    if missing:
        raise MissingCapability(f"model {getattr(model, 'name', model)!r} lacks {missing}")


# ---------------------------------------------------------------------------
# toy gallery


class EuclideanToy:
    """R^2 with the Euclidean metric, F(x) = x2^2, G = translations in x1."""

    name = "euclidean"
    declared_minimizer = True

    def __init__(self):
        self.basepoint = np.zeros(2)

    def sample(self, rng):
        return rng.normal(size=2) * 10.0 ** rng.uniform(-1.5, 1.0)

    def distance(self, p, q):
        return float(np.linalg.norm(np.asarray(p) - np.asarray(q)))

    def geodesic(self, p, q, t):
        return (1 - t) * np.asarray(p) + t * np.asarray(q)

    def act(self, g, p):
        return np.asarray(p) + np.array([g, 0.0])

    def group_sample(self, rng):
        return float(rng.normal(scale=3.0))

    def functional(self, p):
        return float(p[1] ** 2)

    def quotient(self, p, q):
        g = float(p[0] - q[0])
        return self.distance(p, self.act(g, q)), g

    def minimizer(self, rng):
        return np.array([rng.normal(scale=3.0), 0.0])


class ScaledMetricToy(EuclideanToy):
    """Metric pulled back by (x1, x2) -> (e^x1, x2): translations are not isometries."""

    name = "scaled-metric"

    def distance(self, p, q):
        return float(math.hypot(math.exp(p[0]) - math.exp(q[0]), p[1] - q[1]))

    def geodesic(self, p, q, t):
        a = (1 - t) * math.exp(p[0]) + t * math.exp(q[0])
        return np.array([math.log(a), (1 - t) * p[1] + t * q[1]])

    def sample(self, rng):
        return np.array([rng.uniform(-1.5, 1.5), rng.normal() * 10.0 ** rng.uniform(-1.5, 1.0)])


class TrivialGroupToy(EuclideanToy):
    """Euclidean toy with G = {identity}: minimizers are not one orbit."""

    name = "trivial-group"

    def group_sample(self, rng):
        return 0.0

    def act(self, g, p):
        return np.asarray(p)

    def quotient(self, p, q):
        return self.distance(p, q), 0.0


class ShiftedFunctionalToy(EuclideanToy):
    """F(x) = x2^2 + 0.1 x1: translations shift F by a constant.

    The cocycle F(v) - F(u) stays invariant, so P7 holds; what fails is
    G-invariance of F itself (and F has no minimizer).
    """

    name = "shifted-functional"
    declared_minimizer = False

    def functional(self, p):
        return float(p[1] ** 2 + 0.1 * p[0])

    minimizer = None


class TiltedFunctionalToy(EuclideanToy):
    """F(x) = x2^2 + 0.1 x1^2: translations change the cocycle, violating P7."""

    name = "tilted-functional"
    declared_minimizer = True

    def functional(self, p):
        return float(p[1] ** 2 + 0.1 * p[0] ** 2)

    def minimizer(self, rng):
        return np.zeros(2)


TOYS = {c.name: c for c in (EuclideanToy, ScaledMetricToy, TrivialGroupToy, ShiftedFunctionalToy, TiltedFunctionalToy)}


# ---------------------------------------------------------------------------
# the toric model as a variational model


class ToricVariationalModel:
    """AM-normalised symplectic potentials with d1, linear geodesics, the
    torus action and the K-energy."""

    def __init__(self, model, functional: str = "k_energy", name: str | None = None, declared_minimizer: bool | None = None):
        from .functionals import ding, k_energy

        self.model = model
        self.name = name or f"toric-{model.poly.name}"
        self.basepoint = model.zero()
        self._F = {"k_energy": k_energy, "ding": ding}[functional]
        if declared_minimizer is None:
            declared_minimizer = bool(model.fano_flag and np.allclose(model.poly.barycenter, 0, atol=1e-12))
        self.declared_minimizer = declared_minimizer
        # functionals are quadrature approximations: invariances hold to grid accuracy
        self.tolerances = {"P4": 1e-10, "P6": 1e-8, "P7": 1e-4}

    def sample(self, rng):
        from .potentials import random_convex

        return random_convex(self.model, rng, scale=10.0 ** rng.uniform(-1.0, 0.7), normalize=True)

    def distance(self, p, q):
        return self.model.mean(np.abs(p.values - q.values))

    def geodesic(self, p, q, t):
        from .toric_model import geodesic

        return geodesic(p, q, t)

    def act(self, g, p):
        from .toric_model import torus_act

        return torus_act(p, g)

    def group_sample(self, rng):
        from .model import AffineFunction

        return AffineFunction(rng.normal(scale=0.7, size=self.model.n), 0.0)

    def functional(self, p):
        return self._F(p)

    def quotient(self, p, q):
        from .model import AffineFunction
        from .quotient import d1_quotient

        r = d1_quotient(p, q, free_constant=False)
        return r.value, AffineFunction(r.minimizer.b, 0.0)

    def minimizer(self, rng):
        if not self.declared_minimizer:
            return None
        return self.act(self.group_sample(rng), self.basepoint)


# ---------------------------------------------------------------------------


@dataclass
class PropertyResult:
    status: str  # pass | fail | skipped
    samples: int = 0
    tolerance: float | None = None
    worst: float | None = None
    witness: dict | None = None
    note: str = ""


@dataclass
class HypothesisReport:
    model: str
    seed: int
    budget: int
    results: dict = field(default_factory=dict)
    g_invariance: PropertyResult | None = None

    def status(self, prop: str) -> str:
        return self.results[prop].status

    def to_dict(self) -> dict:
        return {"model": self.model, "seed": self.seed, "budget": self.budget,
                "results": {k: asdict(v) for k, v in self.results.items()},
                "g_invariance": asdict(self.g_invariance) if self.g_invariance else None,
                "semantics": "pass = no violation among the stated number of random samples"}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return repr(x)


def _streams(seed: int):
    ss = np.random.SeedSequence(seed).spawn(len(PROPERTIES))
    return {p: s for p, s in zip(PROPERTIES, ss)}


def _sample_rng(seed: int, prop: str, k: int) -> np.random.Generator:
    # one independent stream per (property, sample index): a larger budget extends, never reshuffles
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(PROPERTIES.index(prop), k)))


def _scale(*vals) -> float:
    return max([1.0] + [abs(float(v)) for v in vals])


def check_hypotheses(model, budget: int = 100, seed: int = 0, tol: dict | None = None) -> HypothesisReport:
    _require(model)
    if budget < 100:
        raise ValueError("budget must be at least 100 samples")
    tol = {"P1": 1e-4, "P4": 1e-8, "P5": 1e-6, "P6": 1e-6, "P7": 1e-6, "G": 1e-6,
           **getattr(model, "tolerances", {}), **(tol or {})}
    streams = _streams(seed)
    rep = HypothesisReport(getattr(model, "name", type(model).__name__), seed, budget)

    def rng_for(prop, k):
        return _sample_rng(seed, prop, k)

    # P1: convexity of F along geodesics, 11-point second differences
    n1 = max(10, budget // 10)
    worst, wit = np.inf, None
    for k in range(n1):
        rng = rng_for("P1", k)
        p, q = model.sample(rng), model.sample(rng)
        F = np.array([model.functional(model.geodesic(p, q, t)) for t in np.linspace(0, 1, 11)])
        sec = F[:-2] - 2 * F[1:-1] + F[2:]
        val = float(sec.min()) / _scale(*F)
        if val < worst:
            worst = val
            if val < -tol["P1"]:
                wit = wit or {"sample": k, "second_difference": float(sec.min())}
    rep.results["P1"] = PropertyResult("fail" if wit else "pass", n1, tol["P1"], worst, wit)

    rep.results["P2"] = PropertyResult("skipped", note="compactness of minimizing sequences has no finite test")
    rep.results["P3"] = PropertyResult("skipped", note="regularity of minimizers is an assumption, not a computation")

    # P4: group elements act by isometries
    worst, wit = 0.0, None
    for k in range(budget):
        rng = rng_for("P4", k)
        p, q, g = model.sample(rng), model.sample(rng), model.group_sample(rng)
        d0 = model.distance(p, q)
        err = abs(model.distance(model.act(g, p), model.act(g, q)) - d0) / _scale(d0)
        worst = max(worst, err)
        if err > tol["P4"] and wit is None:
            wit = {"sample": k, "defect": err}
    rep.results["P4"] = PropertyResult("fail" if wit else "pass", budget, tol["P4"], worst, wit)

    # P5: G is transitive on minimizers
    mini = getattr(model, "minimizer", None)
    if mini is None or mini(np.random.default_rng(0)) is None:
        rep.results["P5"] = PropertyResult("skipped", note="model exposes no minimizers")
    else:
        worst, wit = 0.0, None
        n5 = max(10, budget // 10)
        for k in range(n5):
            rng = rng_for("P5", k)
            a, b = mini(rng), mini(rng)
            dq = model.quotient(a, b)[0]
            worst = max(worst, dq)
            if dq > tol["P5"] and wit is None:
                wit = {"sample": k, "quotient_distance": dq}
        rep.results["P5"] = PropertyResult("fail" if wit else "pass", n5, tol["P5"], worst, wit)

    # P6: the quotient distance is attained by some group element
    worst, wit = 0.0, None
    n6 = max(10, budget // 5)
    for k in range(n6):
        rng = rng_for("P6", k)
        p, q = model.sample(rng), model.sample(rng)
        val, g = model.quotient(p, q)
        err = abs(model.distance(p, model.act(g, q)) - val) / _scale(val)
        over = val - model.distance(p, q)
        err = max(err, over / _scale(val))
        worst = max(worst, err)
        if err > tol["P6"] and wit is None:
            wit = {"sample": k, "attainment_defect": err}
    rep.results["P6"] = PropertyResult("fail" if wit else "pass", n6, tol["P6"], worst, wit)

    # P7: the cocycle F(u, v) = F(v) - F(u) is G-invariant
    worst, wit = 0.0, None
    n7 = max(10, budget // 5)
    for k in range(n7):
        rng = rng_for("P7", k)
        p, q, g = model.sample(rng), model.sample(rng), model.group_sample(rng)
        fp, fq = model.functional(p), model.functional(q)
        gp, gq = model.functional(model.act(g, p)), model.functional(model.act(g, q))
        err = abs((gq - gp) - (fq - fp)) / _scale(fp, fq, gp, gq)
        worst = max(worst, err)
        if err > tol["P7"] and wit is None:
            wit = {"sample": k, "cocycle_defect": err}
    rep.results["P7"] = PropertyResult("fail" if wit else "pass", n7, tol["P7"], worst, wit)
    inv = g_invariance(model, n7, streams["P7"], tol.get("G", tol["P7"]))
    rep.g_invariance = inv
    return rep


def g_invariance(model, n: int, stream, tol: float) -> PropertyResult:
    """F(g.u) = F(u) on samples (implied by P4-P7 when a minimizer exists)."""
    rng = np.random.default_rng(stream.spawn(1)[0] if isinstance(stream, np.random.SeedSequence) else stream)
    worst, wit = 0.0, None
    for k in range(n):
        p, g = model.sample(rng), model.group_sample(rng)
        fp, gp = model.functional(p), model.functional(model.act(g, p))
        err = abs(gp - fp) / _scale(fp, gp)
        worst = max(worst, err)
        if err > tol and wit is None:
            wit = {"sample": k, "invariance_defect": err}
    return PropertyResult("fail" if wit else "pass", n, tol, worst, wit)


def existence_properness_test(model, budget: int = 100, seed: int = 0, inv_tol: float | None = None) -> dict:
    """Fit F >= C d_G(G0, Gu) - D over samples and compare with the declared minimizer status.

    G-invariance of F is checked first; when it fails the principle cannot
    apply and the verdict is "not-G-invariant".
    """
    _require(model)
    if inv_tol is None:
        inv_tol = getattr(model, "tolerances", {}).get("P7", 1e-6)
    ss = np.random.SeedSequence(seed).spawn(2)
    inv = g_invariance(model, 10, ss[0], inv_tol)
    declared = bool(getattr(model, "declared_minimizer", False))
    if inv.status == "fail":
        return {"model": model.name, "verdict": "not-G-invariant", "invariance_defect": inv.worst,
                "witness": inv.witness, "declared_minimizer": declared, "consistent": not declared}
    rng = np.random.default_rng(ss[1])
    F0 = model.functional(model.basepoint)
    pts = []
    for _ in range(budget):
        p = model.sample(rng)
        pts.append((model.quotient(model.basepoint, p)[0], model.functional(p) - F0))
    fit = properness_fit(pts, family=f"{model.name} random samples")
    return {"model": model.name, "verdict": fit.verdict, "fit": fit.to_dict(), "invariance_defect": inv.worst,
            "declared_minimizer": declared, "consistent": (fit.verdict == "proper") == declared}


def geodesic_descent_check(model, u, v, tolerance: float = 1e-3, params=(0.0, 0.25, 0.5, 0.75, 1.0)) -> bool:
    """Quotient distances along the geodesic u -> v scale with the parameter gap."""
    d = model.distance(u, v)
    dq = model.quotient(u, v)[0]
    if abs(dq - d) > tolerance * _scale(d):
        raise PreconditionNotMet(f"d_G(u, v) = {dq:.6g} differs from d(u, v) = {d:.6g}")
    pts = {t: model.geodesic(u, v, t) for t in params}
    for i, a in enumerate(params):
        for b in params[i + 1:]:
            if abs(model.quotient(pts[a], pts[b])[0] - (b - a) * d) > tolerance * _scale(d):
                return False
    return True
