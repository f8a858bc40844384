import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from solenoids import (
    GraphSolenoid,
    LinearTorusFoliation,
    Profile,
    QuadratureSpec,
    Subtorus,
    build_cantor,
    horizontal_circles,
    kronecker,
    rs_class,
)
from solenoids.errors import ContractRefusal, ParameterError, PerturbationFailure, TangencyError
from solenoids.intersection import intersect_submanifold, pairing_via_thom, perturb_to_transversality
from solenoids.intersection.submanifold import box_bump

from conftest import ALPHA

A = 0.2


def tangent_graph():
    K = build_cantor({"construction": "middle", "ratio": 0.6, "depth": 6})
    g = GraphSolenoid(K, Profile(cos=((1, -A),), shift=A))
    z0 = float(K.representatives(6)[5])
    return g, Subtorus(2, (1,), (z0,))


def test_designed_scenario_is_tangent():
    g, N = tangent_graph()
    reps = np.ravel(g.transversal.representatives(6))
    # the other level where a leaf is critical (maximum, 2A above) misses every leaf
    gap = (N.centers[0] - 2 * A - reps + 0.5) % 1 - 0.5
    assert np.min(np.abs(gap)) > 0.1
    with pytest.raises(TangencyError) as exc:
        intersect_submanifold(g, N)
    assert exc.value.details["cylinder"] == "000101"


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_perturbation_repairs_tangency(eps):
    g, N = tangent_graph()
    result = perturb_to_transversality(g, N, eps, seed=0)
    assert result.min_margin >= eps / 10
    assert all(np.linalg.norm(v) <= eps for v in result.moves.values())
    Z = intersect_submanifold(result.model, N)
    assert len(Z.keys) > 0
    assert rs_class(result.model).distance(rs_class(g)) < 1e-12


def test_perturbation_leaves_transversal_models_alone():
    K = build_cantor({"depth": 4})
    result = perturb_to_transversality(horizontal_circles(K), Subtorus(2, (0,), (0.3,)), 1e-2)
    assert result.unchanged and result.samples == 0


def test_perturbation_is_deterministic():
    g, N = tangent_graph()
    r1 = perturb_to_transversality(g, N, 1e-2, seed=4)
    r2 = perturb_to_transversality(g, N, 1e-2, seed=4)
    assert r1.moves.keys() == r2.moves.keys()
    assert all(np.array_equal(r1.moves[k], r2.moves[k]) for k in r1.moves)


def test_unreachable_margin_fails_naming_cylinder():
    g, N = tangent_graph()
    # crossings of this profile never reach margin 0.95
    with pytest.raises(PerturbationFailure) as exc:
        perturb_to_transversality(g, N, 0.95, delta=0.95, retries=5)
    assert exc.value.details["cylinder"] == "000000"
    assert "margin" in exc.value.diagnostic


def test_perturbation_parameter_checks():
    g, N = tangent_graph()
    with pytest.raises(ParameterError):
        perturb_to_transversality(g, N, 1e-2, delta=0.5)
    with pytest.raises(ContractRefusal):
        perturb_to_transversality(g, horizontal_circles(g.transversal), 1e-2)
    with pytest.raises(ParameterError):
        perturb_to_transversality(kronecker(ALPHA), N, 1e-2)


@given(center=st.floats(0, 1), s=st.floats(0, 1))
def test_box_bump_derivative(center, s):
    h = 1e-6
    val, der = box_bump(s, center, 8)
    fd = (box_bump(s + h, center, 8)[0] - box_bump(s - h, center, 8)[0]) / (2 * h)
    assert 0 <= val <= 1
    assert der == pytest.approx(fd, abs=1e-5)


def test_zero_solenoid_carries_masses_and_signs():
    K = build_cantor({"depth": 5, "measure": {"kind": "bernoulli", "p": 0.3}})
    Z = intersect_submanifold(horizontal_circles(K), Subtorus(2, (0,), (0.3,)))
    assert len(Z.keys) == 32
    assert Z.signed_mass == pytest.approx(1.0)
    assert sorted(Z.masses) == pytest.approx(sorted(K.masses(5)))


def test_zero_solenoid_signs_flip_with_orientation():
    K = build_cantor({"depth": 3})
    Z = intersect_submanifold(horizontal_circles(K), Subtorus(2, (0,), (0.1,)))
    W = intersect_submanifold(GraphSolenoid(K, Profile(winding=1)), Subtorus(2, (1,), (0.1,)))
    # horizontal leaves cross {x = c} positively; a winding-one graph crosses {y = c} negatively
    assert Z.signed_mass == pytest.approx(1.0) and W.signed_mass == pytest.approx(-1.0)


@pytest.mark.parametrize("j0", range(4))
def test_linear_slice_pairs_like_thom_wedge(j0):
    V = np.linalg.qr(np.array([[1, 0.3], [0.2, 1], [0.5, 0.7], [0.1, 0.4]]))[0]
    L = LinearTorusFoliation(V, np.zeros(4), depth=2)
    S = intersect_submanifold(L, Subtorus(4, (j0,), (0.2,)))
    q = QuadratureSpec(order=4)
    cL, cS = rs_class(L, q), rs_class(S, q)
    rest = [i for i in range(4) if i != j0]
    # oracle: <S', dx_j> = <L, tau ^ dx_j>, tau carrying the sign (-1)**j0
    for a, j in enumerate(rest):
        shuffle = 1 if j0 < j else -1
        expected = (-1) ** j0 * shuffle * cL[tuple(sorted((j0, j)))]
        assert cS.coefficients[a] == pytest.approx(expected, abs=1e-12)


def test_thom_terms_for_cantor_circles():
    K = build_cantor({"depth": 6})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        terms = pairing_via_thom(horizontal_circles(K), Subtorus(2, (0,), (0.3,)), [1 / 8, 1 / 32])
    assert terms == pytest.approx([1.0, 1.0], abs=1e-12)


def test_thom_warns_when_refining():
    with pytest.warns(UserWarning, match="refining"):
        pairing_via_thom(kronecker(ALPHA, 6), Subtorus(2, (0,), (0.3,)), [1 / 64])
