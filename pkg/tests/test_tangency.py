import math

import numpy as np
import pytest

from solenoids import GraphSolenoid, Profile, build_cantor, horizontal_circles
from solenoids.errors import ContractRefusal
from solenoids.intersection import ae_pairing, detect_tangencies, pairing_via_cup, remark_certificate
from solenoids.intersection.remark import TrigPerturbation, VertexMap
from solenoids.intersection.tangency import critical_values, offset_family
from solenoids.intersection.records import graph_layout

A = 0.2


def thin_pair(depth):
    """Horizontal circles against a winding-one graph whose height difference
    has a critical point landing on a cylinder pair."""
    K = build_cantor({"construction": "middle", "ratio": 0.6, "depth": depth})
    x1 = (math.asin(-1 / (2 * math.pi * A)) / (2 * math.pi)) % 1
    D = x1 + A * (1 - math.cos(2 * math.pi * x1))
    g = GraphSolenoid(K, Profile(winding=1, cos=((1, -A),), shift=0.4 - D + A))
    return horizontal_circles(K), g


def fat_pair(depth=10):
    K = build_cantor({"construction": "fat", "depth": depth, "measure": {"kind": "lebesgue", "normalized": False}})
    line = GraphSolenoid(K, Profile(poly=(0.0,)), "plane", (-1.0, 1.0))
    parabola = GraphSolenoid(K, Profile(poly=(0.0, 0.0, 1.0)), "plane", (-1.0, 1.0))
    return line, parabola


def test_critical_values_of_thin_pair():
    h, g = thin_pair(4)
    L1, L2 = graph_layout(h, 4, 0), graph_layout(g, 4, 0)
    xs, values, parallel = critical_values(L1, L2)
    assert not parallel
    # oracle: D(x) = x + A(1 - cos 2 pi x) has D' = 1 + 2 pi A sin(2 pi x)
    roots = sorted(((math.asin(-1 / (2 * math.pi * A)) / (2 * math.pi)) % 1, (0.5 - math.asin(-1 / (2 * math.pi * A)) / (2 * math.pi)) % 1))
    assert np.allclose(np.sort(np.mod(xs, 1)), roots, atol=1e-9)


def test_thin_pair_flags_one_pair_with_halving_bound():
    for d in (4, 6, 8):
        ts = detect_tangencies(*thin_pair(d))
        assert len(ts.flagged[0]) == 1
        assert ts.mass_bound == pytest.approx(2.0**-d)


def test_thin_ae_pairing_close_to_cup():
    h, g = thin_pair(12)
    ae = ae_pairing(h, g)
    assert abs(ae.value - pairing_via_cup(h, g)) < 1e-4 + ae.mass_bound
    assert offset_family(graph_layout(g, 12, 0)) is not None


def test_refusal_on_coarse_thin_pair():
    with pytest.raises(ContractRefusal) as exc:
        ae_pairing(*thin_pair(4))
    assert exc.value.details["mass_bound"] == pytest.approx(1 / 16)


def test_fat_pair_bound_never_shrinks():
    ts = detect_tangencies(*fat_pair(10))
    assert min(max(b) for b in ts.marginal_bounds) >= 0.2
    assert ts.lower_bound == pytest.approx(0.2, abs=1e-12)


def test_fat_refusal_reports_lower_bound():
    with pytest.raises(ContractRefusal) as exc:
        ae_pairing(*fat_pair(10))
    assert "exceeding their hull by 0.2" in exc.value.diagnostic
    assert exc.value.details["lower_bound"] == pytest.approx(0.2, abs=1e-12)


def test_trig_perturbation_respects_sup_norm():
    g = TrigPerturbation.random(3, sup=0.01)
    assert g.sup_bound() == pytest.approx(0.01)
    x, z = np.meshgrid(np.linspace(0, 1, 50), np.linspace(0, 1, 50))
    assert max(abs(g(a, b)) for a, b in zip(x.ravel(), z.ravel())) <= 0.01 + 1e-15


def test_vertex_map_is_parabola_minimum():
    g = TrigPerturbation.random(5, sup=0.01)
    r = VertexMap(g)
    c, p, q, ph = (np.array(v) for v in (g.coeffs, g.px, g.qz, g.phase))
    # the vertex satisfies |x| <= sup |g_x| / 2 < 0.07
    xs = np.linspace(-0.1, 0.1, 200_001)
    for z in (0.0, 0.3, 0.9):
        gz = np.cos(2 * np.pi * (np.outer(xs, p) + q * z) + ph) @ c
        brute = np.min(xs**2 + z + gz)
        assert r(z) <= brute + 1e-15
        assert r(z) == pytest.approx(brute, abs=1e-9)


def test_remark_certificates(fat16):
    certs = [remark_certificate(fat16, fat16, seed) for seed in range(5)]
    assert all(c.certified for c in certs)
    # frequencies in z are at most 2, so r' >= 1 - 0.01 * 2 pi * 2
    assert all(c.slope_lower_bound >= 1 - 0.04 * math.pi for c in certs)
