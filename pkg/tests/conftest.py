import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kfl.model import ToricModel
from kfl.polytope import interval, named

settings.register_profile(
    "kfl", deadline=None, max_examples=25, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "kfl"))

_MODELS = {}


def model(name: str, N: int) -> ToricModel:
    key = (name, N)
    if key not in _MODELS:
        poly = interval(0.0, 1.0) if name == "unit" else named(name)
        _MODELS[key] = ToricModel(poly, N)
    return _MODELS[key]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
