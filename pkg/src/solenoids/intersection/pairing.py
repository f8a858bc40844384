"""Intersection pairings by signed counting, by cup products and by
ergodic exhaustion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..currents import QuadratureSpec, poincare_dual_pairing, rs_class
from ..errors import ContractRefusal, ParameterError, TangencyError
from ..models import GraphSolenoid, LinearTorusFoliation, SolenoidModel
from .records import TANGENCY_THRESHOLD, GraphLayout, _depths, as_model, graph_layout, intersection_points


# -- signed counting via the degree of the height difference ---------------------


def step_pair_sum(w1: np.ndarray, v: np.ndarray, w2: np.ndarray, u: np.ndarray, periodic: bool) -> float:
    """``sum_ij w1_i w2_j f(u_j - v_i)`` with ``f = ceil`` (periodic) or the
    step ``[x > 0]``, in ``O((C1 + C2) log C2)``."""
    order = np.argsort(u, kind="stable")
    us, ws = u[order], w2[order]
    suffix = np.concatenate([np.cumsum(ws[::-1])[::-1], [0.0]])

    def above(t):  # sum of w2_j with u_j > t
        return suffix[np.searchsorted(us, t, side="right")]

    if not periodic:
        return float(np.sum(w1 * above(v)))
    total_w2 = suffix[0]
    k0 = np.ceil(us[0] - v)
    kmax = np.ceil(us[-1] - v)
    span = int(np.max(kmax - k0)) if len(v) else 0
    inner = k0 * total_w2
    for step in range(span):
        k = k0 + step
        inner = inner + np.where(k < kmax, above(k + v), 0.0)
    return float(np.sum(w1 * inner))


def _orientation(model: SolenoidModel, layout: GraphLayout) -> int:
    J = model.jacobian(layout.depth, np.array([0]), np.array([[0.5]]))[0, 0, :, 0]
    return 1 if J[layout.axis] > 0 else -1


def _degree_sum(L1: GraphLayout, L2: GraphLayout, w1, w2, periodic: bool) -> float:
    """Signed crossings of all piece pairs weighted by ``w1_i w2_j``: the
    count for a pair is the change of ``f`` of the height difference
    between the two ends of the common interval."""
    s1, e1 = L1.ends()
    s2, e2 = L2.ends()
    sign = _orientation(L1.model, L1) * _orientation(L2.model, L2)
    return sign * (step_pair_sum(w1, e1, w2, e2, periodic) - step_pair_sum(w1, s1, w2, s2, periodic))


def pair_counts(L1: GraphLayout, L2: GraphLayout, i, j, periodic: bool) -> np.ndarray:
    """Signed crossing counts of the listed piece pairs."""
    s1, e1 = L1.ends(i)
    s2, e2 = L2.ends(j)
    f = np.ceil if periodic else (lambda x: (x > 0).astype(float))
    sign = _orientation(L1.model, L1) * _orientation(L2.model, L2)
    return sign * (f(e2 - e1) - f(s2 - s1))


def compatible_layouts(m1, m2, depth1, depth2):
    """Both models as graphs over the same interval of ``x_1``, or None."""
    if m1.n != 2 or m1.k != 1 or m2.k != 1 or m1.ambient != m2.ambient:
        return None
    L1, L2 = graph_layout(m1, depth1, 0), graph_layout(m2, depth2, 0)
    if L1 is None or L2 is None:
        return None
    if not (np.isclose(L1.start, L2.start, atol=1e-12) and np.isclose(L1.width, L2.width, atol=1e-12)):
        return None
    if m1.ambient == "torus" and not np.isclose(L1.width, 1.0):
        return None
    return L1, L2


def _check_complementary(m1, m2):
    if m1.n != m2.n:
        raise ParameterError("models live in different ambient spaces")
    if m1.k + m2.k != m1.n:
        raise ParameterError(f"leaf dimensions {m1.k} + {m2.k} are not complementary in dimension {m1.n}")


def pairing_exact(m1, m2, depth: int | None = None, threshold: float = TANGENCY_THRESHOLD) -> float:
    """``sum mass1(C1) mass2(C2) * (signed crossings of the representative
    pieces)`` over all cylinder pairs.

    Refuses when a representative pair is tangent; use ``ae_pairing`` then.
    """
    from .tangency import representative_tangencies

    m1, m2 = as_model(m1), as_model(m2)
    _check_complementary(m1, m2)
    d1, d2 = _depths(m1, m2, depth)
    layouts = compatible_layouts(m1, m2, d1, d2)
    if layouts is not None:
        L1, L2 = layouts
        bad = representative_tangencies(L1, L2)
        if bad is not None:
            if len(bad[0]):
                k1 = m1.cylinders(d1).keys[bad[0][0]]
                k2 = m2.cylinders(d2).keys[bad[1][0]]
                raise TangencyError(
                    f"{len(bad[0])} representative leaf pairs are tangent (first: {k1!r} x {k2!r}); use ae_pairing",
                    pairs=len(bad[0]),
                )
            periodic = m1.ambient == "torus"
            w1, w2 = m1.cylinders(d1).masses, m2.cylinders(d2).masses
            forward = _degree_sum(L1, L2, w1, w2, periodic)
            backward = _degree_sum(L2, L1, w2, w1, periodic)
            # the two orders agree up to ties; averaging makes swapping exact
            return 0.5 * (forward - backward) if m1.k * m2.k % 2 else 0.5 * (forward + backward)
    records = intersection_points(m1, m2, depth, threshold)
    return _records_sum(records, m1, m2)


def _records_sum(records, m1, m2) -> float:
    tangent = [r for r in records if not r.transversal]
    if tangent:
        raise TangencyError(
            f"{len(tangent)} tangential intersection records (first at {tangent[0].addr1!r} x {tangent[0].addr2!r}); use ae_pairing",
            records=len(tangent),
        )
    return float(np.sum([r.mass * r.index for r in records])) if records else 0.0


def pairing_via_cup(m1, m2, quad: QuadratureSpec | None = None) -> float:
    m1, m2 = as_model(m1), as_model(m2)
    _check_complementary(m1, m2)
    return poincare_dual_pairing(rs_class(m1, quad), rs_class(m2, quad))


# -- ergodic exhaustion -----------------------------------------------------------


@dataclass(frozen=True)
class ExhaustionStep:
    radius1: float
    radius2: float
    count: float
    estimate: float
    error_bound: float


def _refuse_non_ergodic(model, label):
    if not model.uniquely_ergodic:
        raise ContractRefusal(
            f"{label} is not uniquely ergodic in the implemented sense "
            "(single closed leaf, irrational linear foliation with full transversal, "
            "or odometer suspension with the balanced measure)",
            family=model.family,
        )


def lattice_crossings(u1, p1, R1, u2, p2, R2) -> int:
    """Number of ``(t, tau) in [0, R1) x [0, R2)`` with
    ``p1 + t u1 = p2 + tau u2`` mod ``Z^2``.

    Solutions correspond to integer points ``m`` of the parallelogram
    ``p1 - p2 + {t u1 - tau u2}``; rows of fixed ``m_1`` are counted in
    closed form.
    """
    u1, u2 = np.asarray(u1, float), np.asarray(u2, float)
    A = np.column_stack([u1, -u2])
    det = np.linalg.det(A)
    if abs(det) < 1e-15:
        return 0
    Ainv = np.linalg.inv(A)
    delta = np.asarray(p2, float) - np.asarray(p1, float)
    corners = np.array([[0, 0], [R1, 0], [0, R2], [R1, R2]], float) @ A.T - delta
    lo, hi = int(np.floor(corners[:, 0].min())), int(np.ceil(corners[:, 0].max()))
    m1 = np.arange(lo, hi + 1, dtype=float)
    # (t, tau) = Ainv (m + delta); t = a0 + a1 m2, tau = b0 + b1 m2 along a row
    a0 = Ainv[0, 0] * (m1 + delta[0]) + Ainv[0, 1] * delta[1]
    b0 = Ainv[1, 0] * (m1 + delta[0]) + Ainv[1, 1] * delta[1]
    a1, b1 = Ainv[0, 1], Ainv[1, 1]
    low = np.full_like(m1, -np.inf)
    high = np.full_like(m1, np.inf)
    for c0, c1, bound in ((a0, a1, R1), (b0, b1, R2)):
        # 0 <= c0 + c1 m2 < bound
        if abs(c1) < 1e-300:
            ok = (c0 >= 0) & (c0 < bound)
            low = np.where(ok, low, np.inf)
            continue
        e0, e1 = (-c0) / c1, (bound - c0) / c1
        if c1 > 0:  # m2 in [e0, e1)
            low = np.maximum(low, np.ceil(e0))
            high = np.minimum(high, np.ceil(e1) - 1)
        else:  # m2 in (e1, e0]
            low = np.maximum(low, np.floor(e1) + 1)
            high = np.minimum(high, np.floor(e0))
    return int(np.sum(np.maximum(high - low + 1, 0)))


def _linear_direction(model: LinearTorusFoliation) -> np.ndarray:
    return model.V[:, 0]


def _visit_weights(model: SolenoidModel, depth: int, start: int, pieces: int) -> np.ndarray:
    """How often a leaf started in cylinder ``start`` visits each cylinder
    in its first ``pieces`` pieces."""
    nxt, _ = model.continuation(depth)
    C = len(nxt)
    counts = np.zeros(C)
    if np.array_equal(nxt, np.arange(C)):
        counts[start] = pieces
        return counts
    i = start
    for _ in range(pieces):
        counts[i] += 1
        i = int(nxt[i])
    return counts


def exhaustion_estimate(
    m1,
    m2,
    radii,
    base1=None,
    base2=None,
    depth: int | None = None,
) -> list[ExhaustionStep]:
    """Volume-normalised signed counts on growing leaf segments.

    For linear foliations ``base`` is a point of the torus and a segment of
    length ``R`` is used; for piecewise-followed families ``base`` is a
    cylinder address and ``R`` counts leaf pieces.
    """
    m1, m2 = as_model(m1), as_model(m2)
    _check_complementary(m1, m2)
    _refuse_non_ergodic(m1, "first model")
    _refuse_non_ergodic(m2, "second model")
    radii = [(float(r), float(r)) if np.isscalar(r) else (float(r[0]), float(r[1])) for r in radii]
    lin = isinstance(m1, LinearTorusFoliation) and isinstance(m2, LinearTorusFoliation)
    if lin and m1.n == 2 and m1.transversal is None and m2.transversal is None:
        return _linear_exhaustion(m1, m2, radii, base1, base2)
    d1, d2 = _depths(m1, m2, depth)
    layouts = compatible_layouts(m1, m2, d1, d2)
    keys1, keys2 = m1.cylinders(d1).keys, m2.cylinders(d2).keys
    start1 = keys1.index(base1) if base1 is not None else 0
    start2 = keys2.index(base2) if base2 is not None else 0
    if layouts is not None:
        L1, L2 = layouts
        counts_of = lambda w1, w2: _degree_sum(L1, L2, w1, w2, m1.ambient == "torus")  # noqa: E731
    else:
        C1, C2 = len(keys1), len(keys2)
        matrix = np.zeros((C1, C2))
        for rec in intersection_points(m1, m2, depth):
            if not rec.transversal:
                raise TangencyError("tangential crossing on the exhaustion leaves")
            matrix[keys1.index(rec.addr1), keys2.index(rec.addr2)] += rec.index
        counts_of = lambda w1, w2: float(w1 @ matrix @ w2)  # noqa: E731
    steps = []
    for R1, R2 in radii:
        n1, n2 = int(R1), int(R2)
        if n1 < 1 or n2 < 1:
            raise ParameterError("radii must cover at least one leaf piece")
        w1 = _visit_weights(m1, d1, start1, n1)
        w2 = _visit_weights(m2, d2, start2, n2)
        count = counts_of(w1, w2)
        # incomplete pieces at the segment ends
        bound = (n1 + n2) / (n1 * n2) * _max_piece_crossings(m1, m2)
        steps.append(ExhaustionStep(n1, n2, count, count / (n1 * n2), bound))
    return steps


def _max_piece_crossings(m1, m2) -> float:
    """Crude bound on the crossings of one pair of pieces."""
    winding = [abs(m.profile.winding) for m in (m1, m2) if isinstance(m, GraphSolenoid)]
    return 1.0 + sum(winding)


def _linear_exhaustion(m1, m2, radii, base1, base2) -> list[ExhaustionStep]:
    u1, u2 = _linear_direction(m1), _linear_direction(m2)
    p1 = m1.offset if base1 is None else np.asarray(base1, float)
    p2 = m2.offset if base2 is None else np.asarray(base2, float)
    sign = np.sign(np.linalg.det(np.column_stack([u1, u2])))
    steps = []
    for R1, R2 in radii:
        count = sign * lattice_crossings(u1, p1, R1, u2, p2, R2)
        bound = 2.0 * (R1 + R2) / (R1 * R2)
        steps.append(ExhaustionStep(R1, R2, float(count), count / (R1 * R2), bound))
    return steps


__all__ = [
    "ExhaustionStep",
    "exhaustion_estimate",
    "lattice_crossings",
    "pair_counts",
    "pairing_exact",
    "pairing_via_cup",
    "step_pair_sum",
]
