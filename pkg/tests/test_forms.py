import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from solenoids.errors import DegreeError, ParameterError
from solenoids.forms import (
    DifferentialForm,
    Subtorus,
    TrigPoly,
    bump_profile,
    constant_form,
    evaluate,
    exterior_derivative,
    harmonic_basis,
    parse_form,
    random_trig_form,
    thom_form,
    wedge,
)

seeds = st.integers(0, 2**32 - 1)


def _rand(n, k, seed, max_freq=2):
    return random_trig_form(n, k, np.random.default_rng(seed), max_freq=max_freq, n_terms=2)


@given(seed=seeds, n=st.integers(2, 4), data=st.data())
def test_d_squared_is_exactly_zero(seed, n, data):
    k = data.draw(st.integers(0, n - 2))
    assert exterior_derivative(exterior_derivative(_rand(n, k, seed))).is_zero()


@given(seed=seeds, data=st.data())
def test_leibniz_rule_exact(seed, data):
    n = 4
    k = data.draw(st.integers(0, 2))
    l = data.draw(st.integers(0, n - k - 1))
    a, b = _rand(n, k, seed), _rand(n, l, seed + 1)
    lhs = wedge(a, b).d()
    rhs = wedge(a.d(), b) + wedge(a, b.d()).scale((-1) ** k)
    assert lhs == rhs


@given(seed=seeds, k=st.integers(0, 2), l=st.integers(0, 2))
def test_wedge_graded_commutative(seed, k, l):
    a, b = _rand(4, k, seed), _rand(4, l, seed + 7)
    assert wedge(a, b) == wedge(b, a).scale((-1) ** (k * l))


@given(seed=seeds, j=st.integers(0, 2), x=st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_partial_matches_finite_difference(seed, j, x):
    f = _rand(3, 0, seed).terms.get((), TrigPoly.constant(3, 0))
    p = np.array(x)
    h = 1e-5
    e = np.eye(3)[j] * h
    fd = (f(p + e) - f(p - e)) / (2 * h)
    assert f.partial(j)(p) == pytest.approx(fd, abs=1e-5 * (1 + abs(fd)))


def test_evaluate_on_frames():
    vol = harmonic_basis(2, 2)[0]
    p = np.zeros(2)
    assert evaluate(vol, p, np.eye(2)) == 1.0
    assert evaluate(vol, p, np.eye(2)[:, ::-1]) == -1.0
    with pytest.raises(DegreeError):
        evaluate(vol, p, np.eye(2)[:, :1])


def test_constant_form_ordering():
    w = constant_form(3, 2, [1, 2, 3])
    assert list(w.terms) == [(0, 1), (0, 2), (1, 2)]


def test_bad_multi_index():
    with pytest.raises(DegreeError):
        DifferentialForm(3, 2, {(1, 0): 1})
    with pytest.raises(DegreeError):
        wedge(harmonic_basis(2, 2)[0], harmonic_basis(2, 1)[0])


def test_parse_form_matches_direct_construction():
    spec = {"degree": 1, "terms": [{"index": [1], "coefficients": [{"freq": [1, 0], "cos": 0.5, "sin": -1}]},
                                   {"index": [0], "constant": 2}]}
    w = parse_form(2, spec)
    x = np.array([0.3, 0.7])
    assert w.terms[(0,)](x) == 2.0
    expected = 0.5 * math.cos(2 * math.pi * 0.3) - math.sin(2 * math.pi * 0.3)
    assert w.terms[(1,)](x) == pytest.approx(expected)


@pytest.mark.parametrize("rho", [0.2, 0.05, 1 / 64])
def test_bump_has_unit_mass_and_compact_support(rho):
    s = np.linspace(-0.5, 0.5, 400_001)
    b = bump_profile(s, rho)
    assert np.trapezoid(b, s) == pytest.approx(1.0, abs=1e-9)
    assert np.all(b[np.abs(s) >= rho] == 0)


def test_thom_sign_follows_shuffle():
    # {x_1 = c} in T^2: moving dx_1 past dx_0 costs a sign
    assert thom_form(Subtorus(2, (1,), (0.0,)), 0.1).sign == -1
    assert thom_form(Subtorus(2, (0,), (0.0,)), 0.1).sign == 1
    assert thom_form(Subtorus(4, (1, 3), (0.0, 0.0)), 0.1).sign == -1


def test_thom_width_bounds():
    N = Subtorus(2, (0,), (0.5,))
    for rho in (0.0, 0.25, 0.3):
        with pytest.raises(ParameterError):
            thom_form(N, rho)


def test_thom_form_is_closed():
    tau = thom_form(Subtorus(3, (0,), (0.5,)), 0.1)
    assert tau.d().is_zero() and tau.d().degree == 2


def test_subtorus_validation():
    with pytest.raises(ParameterError):
        Subtorus(2, (2,), (0.0,))
    with pytest.raises(ParameterError):
        Subtorus(2, (0,), (0.0, 1.0))
