import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from solenoids import (
    CantorSuspension,
    GraphSolenoid,
    LinearTorusFoliation,
    Perturbation,
    PerturbedModel,
    Profile,
    build_cantor,
    build_return_map,
    horizontal_circles,
    kronecker,
    vertical_circle,
)
from solenoids.errors import ConstructionError, ImmersionError
from solenoids.models import check_rank, immersion_margin, smootherstep, smootherstep_derivative

from conftest import ALPHA


def torus_dist(p, q):
    d = np.asarray(p) - np.asarray(q)
    return float(np.linalg.norm(d - np.round(d)))


def _fleet():
    K = build_cantor({"construction": "middle", "depth": 6})
    return {
        "horizontal": horizontal_circles(K),
        "kronecker": kronecker(ALPHA, 6),
        "vertical": vertical_circle(0.3),
        "graph": GraphSolenoid(K, Profile(winding=1, cos=((1, 0.1),), sin=((2, 0.05),))),
        "plane-graph": GraphSolenoid(K, Profile(poly=(0.0, 0.5, 1.0)), "plane", (-1.0, 1.0)),
        "suspension": CantorSuspension(K, build_return_map("odometer")),
        "perturbed": PerturbedModel(
            GraphSolenoid(K, Profile(winding=1)),
            [Perturbation("bump", amplitude=0.05, i=1, j=0, center=0.2), Perturbation("shear", amplitude=0.03, i=0, j=1)],
        ),
    }


FLEET = _fleet()


@pytest.mark.parametrize("name", FLEET)
def test_immersion_rank_on_random_samples(name):
    assert immersion_margin(FLEET[name], FLEET[name].default_depth, samples=100, seed=1) > 1e-9


@pytest.mark.parametrize("name", FLEET)
def test_jacobian_matches_finite_differences(name):
    m = FLEET[name]
    depth = m.default_depth
    rng = np.random.default_rng(3)
    C = len(m.cylinders(depth))
    idx = rng.integers(0, C, 5)
    s = rng.uniform(0.05, 0.95, (1, 7, m.k))
    h = 1e-6
    for a in range(m.k):
        e = np.zeros(m.k)
        e[a] = h
        fd = (m.lift(depth, idx, s + e) - m.lift(depth, idx, s - e)) / (2 * h)
        assert np.allclose(m.jacobian(depth, idx, s)[..., a], fd, atol=1e-6)


@pytest.mark.parametrize("name", FLEET)
def test_cylinder_masses_sum_to_total(name):
    m = FLEET[name]
    c = m.cylinders(m.default_depth)
    assert len(c.keys) == len(c.masses) == len(set(c.keys))
    K = getattr(m, "transversal", None) or getattr(getattr(m, "base", None), "transversal", None)
    total = K.total_mass if K is not None else abs(m.chart_det)
    assert c.masses.sum() == pytest.approx(total)


@pytest.mark.parametrize("delta", [1e-3, 1e-6, 1e-9])
def test_suspension_continuous_across_gluing(delta):
    s = FLEET["suspension"]
    for addr in ("000000", "110101", "111111"):
        for k in range(1, 4):
            assert torus_dist(s.leaf_point(addr, k - delta), s.leaf_point(addr, k + delta)) < 10 * delta


def test_suspension_leaf_reaches_image_fibre():
    s = FLEET["suspension"]
    h = build_return_map("odometer")
    a = "010011"
    end = s.leaf_point(a, 1.0)
    assert end[0] == pytest.approx(0.0)
    assert end[1] == pytest.approx(s.leaf_point(h(a), 0.0)[1])


@given(x=st.floats(0, 1))
def test_smootherstep_endpoints_and_derivative(x):
    h = 1e-6
    fd = (smootherstep(min(x + h, 1)) - smootherstep(max(x - h, 0))) / (min(x + h, 1) - max(x - h, 0))
    assert smootherstep_derivative(x) == pytest.approx(fd, abs=1e-5)
    assert smootherstep(0.0) == 0.0 and smootherstep(1.0) == 1.0


@given(
    cos=st.lists(st.tuples(st.integers(1, 4), st.floats(-0.3, 0.3)), max_size=3),
    sin=st.lists(st.tuples(st.integers(1, 4), st.floats(-0.3, 0.3)), max_size=3),
    x=st.floats(0, 1),
    order=st.integers(1, 3),
)
def test_profile_derivatives_match_finite_differences(cos, sin, x, order):
    p = Profile(winding=1, shift=0.1, cos=tuple(cos), sin=tuple(sin))
    f = p if order == 1 else (lambda y: p.derivative(y, order - 1))
    h = 1e-5
    fd = (f(x + h) - f(x - h)) / (2 * h)
    assert p.derivative(x, order) == pytest.approx(fd, abs=1e-4 * (1 + abs(fd)))
    assert abs(p.derivative(x, order)) <= p.derivative_bound(order) + 1e-12


def test_graph_leaf_is_the_profile_graph():
    K = build_cantor({"depth": 4})
    psi = Profile(winding=1, cos=((2, 0.1),))
    g = GraphSolenoid(K, psi)
    z = K.representatives(4)[5]
    addr = format(5, "04b")
    for x in (0.0, 0.3, 0.9):
        assert torus_dist(g.leaf_point(addr, x), (x, psi(x) + z)) < 1e-12


def test_linear_directions_must_be_orthonormal():
    with pytest.raises(ConstructionError):
        LinearTorusFoliation(np.array([[1.0], [1.0]]), np.zeros(2))


def test_rank_check_raises():
    with pytest.raises(ImmersionError):
        check_rank(np.zeros((2, 1)), "test")


def test_kronecker_ergodicity_flags():
    assert kronecker(ALPHA).uniquely_ergodic
    assert not kronecker(0.5).uniquely_ergodic
    assert FLEET["suspension"].uniquely_ergodic
