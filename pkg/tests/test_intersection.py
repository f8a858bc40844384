import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from solenoids import (
    GraphSolenoid,
    Profile,
    Subtorus,
    build_cantor,
    build_return_map,
    horizontal_circles,
    kronecker,
    rs_class,
    vertical_circle,
    CantorSuspension,
)
from solenoids.errors import ContractRefusal, TangencyError
from solenoids.intersection import (
    detect_tangencies,
    exhaustion_estimate,
    intersection_points,
    lattice_crossings,
    pairing_exact,
    pairing_via_cup,
)
from solenoids.intersection.pairing import step_pair_sum
from solenoids.intersection.records import frame_margin, scalar_roots

from conftest import ALPHA, BETA, kronecker_det

K6 = build_cantor({"construction": "middle", "depth": 6})


def brute_lattice(u1, p1, R1, u2, p2, R2):
    """Solve ``p1 + t u1 = p2 + tau u2 + m`` for every integer ``m`` in a box."""
    A = np.column_stack([u1, -np.asarray(u2)])
    reach = int(np.ceil(R1 * np.abs(u1).max() + R2 * np.abs(u2).max())) + 2
    count = 0
    for m0 in range(-reach, reach + 1):
        for m1 in range(-reach, reach + 1):
            t, tau = np.linalg.solve(A, np.array([m0, m1]) + np.asarray(p2) - np.asarray(p1))
            count += (0 <= t < R1) and (0 <= tau < R2)
    return count


@given(
    a=st.floats(-2, 2), b=st.floats(-2, 2),
    p=st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99)),
    R1=st.floats(0.5, 6), R2=st.floats(0.5, 6),
)
def test_lattice_crossings_against_brute_force(a, b, p, R1, R2):
    assume(abs(a - b) > 0.05)
    u1 = np.array([1.0, a]) / math.hypot(1, a)
    u2 = np.array([1.0, b]) / math.hypot(1, b)
    # generic base point: endpoint hits have probability zero
    p1 = (0.1234567, 0.7654321)
    fast = lattice_crossings(u1, p1, R1, u2, p, R2)
    slow = brute_lattice(u1, p1, R1, u2, p, R2)
    # an endpoint within round-off of a crossing may still go either way
    assert abs(fast - slow) <= 1


@given(
    w1=st.lists(st.floats(0, 1), min_size=1, max_size=12),
    data=st.data(),
    periodic=st.booleans(),
)
def test_step_pair_sum_against_double_loop(w1, data, periodic):
    n2 = data.draw(st.integers(1, 12))
    v = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=len(w1), max_size=len(w1))))
    u = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=n2, max_size=n2)))
    w2 = np.array(data.draw(st.lists(st.floats(0, 1), min_size=n2, max_size=n2)))
    diffs = u[None, :] - v[:, None]
    # ties within round-off of an integer are boundary cases with no defined side
    assume(np.all(np.abs(diffs - np.round(diffs)) > 1e-9))
    f = math.ceil if periodic else (lambda x: float(x > 0))
    oracle = sum(a * b * f(Fraction(uj) - Fraction(vi)) for a, vi in zip(w1, v) for b, uj in zip(w2, u))
    assert step_pair_sum(np.array(w1), v, w2, u, periodic) == pytest.approx(oracle, abs=1e-9)


def test_scalar_roots_of_shifted_sine():
    f = lambda rows, t: np.sin(2 * np.pi * t) * (1 + rows[:, None]) + 0.25  # noqa: E731
    df = lambda rows, t: 2 * np.pi * np.cos(2 * np.pi * t) * (1 + rows[:, None])  # noqa: E731
    r = scalar_roots(f, df, 2, periodic=False)
    for row in (0, 1):
        got = np.sort(r.t[r.row == row])
        x = math.asin(-0.25 / (1 + row)) / (2 * math.pi)
        assert np.allclose(got, np.sort([0.5 - x, 1 + x]), atol=1e-11)


def test_scalar_roots_flags_double_root():
    f = lambda rows, t: -1.0 - np.cos(2 * np.pi * t)  # noqa: E731  touches 0 at t = 1/2
    df = lambda rows, t: 2 * np.pi * np.sin(2 * np.pi * t)  # noqa: E731
    r = scalar_roots(f, df, 1, periodic=False)
    assert len(r.t) == 1 and r.tangent.all()
    assert r.t[0] == pytest.approx(0.5, abs=1e-6)


def test_frame_margin_orthogonal_and_parallel():
    m, s = frame_margin(np.array([[1.0], [0.0]]), np.array([[0.0], [2.0]]))
    assert m == pytest.approx(1.0) and s == 1
    m, _ = frame_margin(np.array([[1.0], [1.0]]), np.array([[2.0], [2.0]]))
    assert m == pytest.approx(0.0, abs=1e-15)


def test_horizontal_vertical_records():
    recs = intersection_points(horizontal_circles(build_cantor({"depth": 3})), vertical_circle(0.3), 3)
    assert len(recs) == 8
    assert all(r.index == 1 and r.transversal and r.margin == pytest.approx(1.0) for r in recs)
    assert sum(r.mass * r.index for r in recs) == pytest.approx(1.0)


@pytest.mark.parametrize("winding", [-2, 1, 3])
def test_pairing_with_graph_equals_winding(winding):
    g = GraphSolenoid(K6, Profile(winding=winding, cos=((1, 0.1),)))
    h = horizontal_circles(build_cantor({"construction": "middle", "ratio": 0.5, "depth": 5}))
    assert pairing_exact(h, g) == pytest.approx(winding, abs=1e-12)
    assert pairing_via_cup(h, g) == pytest.approx(winding, abs=1e-12)


def test_pairing_is_antisymmetric():
    k1, k2 = kronecker(ALPHA, 10), kronecker(BETA, 10)
    assert pairing_exact(k1, k2) == -pairing_exact(k2, k1)


def test_kronecker_pairing_against_determinant():
    oracle = kronecker_det(ALPHA, BETA)
    assert oracle == pytest.approx((BETA - ALPHA) / math.sqrt((1 + ALPHA**2) * (1 + BETA**2)), rel=1e-14)
    assert pairing_via_cup(kronecker(ALPHA), kronecker(BETA)) == pytest.approx(oracle, abs=1e-14)
    errs = [abs(pairing_exact(kronecker(ALPHA), kronecker(BETA), d) - oracle) for d in (8, 10, 12)]
    assert errs[-1] < 1e-4 and errs[-1] < errs[0]


def test_parallel_pair_has_zero_pairing():
    k1 = kronecker(ALPHA, 8)
    k2 = kronecker(ALPHA, 8, offset=(0.0, 0.37))
    assert pairing_exact(k1, k2) == 0.0


def test_coincident_parallel_leaves_raise():
    g1 = GraphSolenoid(K6, Profile(winding=1))
    with pytest.raises(TangencyError):
        detect_tangencies(g1, g1)


def test_plane_parabola_tangent_to_line_flagged():
    K = build_cantor({"construction": "point", "at": 0.0})
    line = GraphSolenoid(K, Profile(poly=(0.0,)), "plane", (-1.0, 1.0))
    parabola = GraphSolenoid(K, Profile(poly=(0.0, 0.0, 1.0)), "plane", (-1.0, 1.0))
    ts = detect_tangencies(line, parabola)
    assert not ts.empty and ts.mass_bound == pytest.approx(1.0)


def test_exhaustion_converges_to_determinant():
    oracle = kronecker_det(ALPHA, BETA)
    steps = exhaustion_estimate(kronecker(ALPHA), kronecker(BETA), [10.0, 100.0, 1000.0])
    for s in steps:
        assert abs(s.estimate - oracle) <= s.error_bound
    # oracle: the estimate is the brute-force count over R^2
    s = steps[0]
    u1 = np.array([1.0, ALPHA]) / math.hypot(1, ALPHA)
    u2 = np.array([1.0, BETA]) / math.hypot(1, BETA)
    brute = brute_lattice(u1, (0.0, 0.0), 10.0, u2, (0.0, 0.0), 10.0)
    assert abs(s.count) == pytest.approx(brute, abs=1)


def test_exhaustion_on_odometer_suspension():
    K = build_cantor({"depth": 8})
    s = CantorSuspension(K, build_return_map("odometer"))
    v = vertical_circle(0.5)
    steps = exhaustion_estimate(s, v, [16, 64, 256], "00000000", "")
    assert steps[-1].estimate == pytest.approx(1.0, abs=steps[-1].error_bound + 1e-12)


def test_exhaustion_refuses_rational_slope():
    with pytest.raises(ContractRefusal):
        exhaustion_estimate(kronecker(0.5), kronecker(BETA), [10.0])


def test_cup_matches_class_determinant():
    g = GraphSolenoid(K6, Profile(winding=1, sin=((2, 0.1),)))
    k = kronecker(ALPHA, 6)
    c1, c2 = rs_class(g).coefficients, rs_class(k).coefficients
    assert pairing_via_cup(g, k) == pytest.approx(c1[0] * c2[1] - c1[1] * c2[0], abs=1e-13)
