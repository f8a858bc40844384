import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from solenoids.cantor import build_cantor

settings.register_profile("repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

ALPHA = math.sqrt(2) - 1
BETA = math.sqrt(3) - 1


def kronecker_det(a: float, b: float) -> float:
    """Signed area spanned by the unit vectors along slopes ``a`` and ``b``."""
    u = np.array([1.0, a]) / math.hypot(1.0, a)
    v = np.array([1.0, b]) / math.hypot(1.0, b)
    return float(u[0] * v[1] - u[1] * v[0])


@pytest.fixture
def middle6():
    return build_cantor({"construction": "middle", "ratio": 0.6, "depth": 6})


@pytest.fixture
def fat16():
    return build_cantor({"construction": "fat", "depth": 16, "measure": {"kind": "lebesgue", "normalized": False}})


_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    ok = _criteria.get(number, (title, True))[1] and rep.passed
    _criteria[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
