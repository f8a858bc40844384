"""Tangency loci, their transversal mass, and the pairing that excludes them.

For two families of graphs ``y = h_1(x) + z_1`` and ``y = h_2(x) + z_2``
(offset families) a pair of leaves is tangent exactly when ``z_1 - z_2``
equals a critical value of ``D = h_2 - h_1`` (mod 1 on the torus).  So a
cylinder pair can carry tangent leaves only if some critical value lies in
the difference of its two transversal intervals, which is an interval test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractRefusal, ParameterError, TangencyError
from ..forms import Subtorus
from .pairing import _check_complementary, _depths, _degree_sum, compatible_layouts, pair_counts
from .records import (
    TANGENCY_THRESHOLD,
    GraphLayout,
    IntersectionRecord,
    as_model,
    frame_margin,
    intersection_points,
    scalar_roots,
    subtorus_records,
)

# interval slack absorbing round-off in the critical values
INTERVAL_SLACK = 1e-12
# representative offsets this close to a critical value are tangent
REP_TOL = 1e-10
NULL_TOLERANCE = 1e-2
MAX_FLAGGED_PAIRS = 20_000_000


@dataclass(frozen=True)
class OffsetFamily:
    """Offsets ``z_c`` (heights at the left end) and their transversal
    intervals for an x-graph layout of the form ``h(x) + z_c``."""

    layout: GraphLayout
    z: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def offset_family(L: GraphLayout) -> OffsetFamily | None:
    model, depth = L.model, L.depth
    cyl = model.cylinders(depth)
    x = L.start + L.width * np.linspace(0.0, 1.0, 33)
    C = len(cyl)
    Y = L.value(np.arange(C), np.broadcast_to(x, (C, len(x))))
    shape = Y - Y[:, :1]
    if not np.allclose(shape, shape[0], atol=1e-12, rtol=0):
        return None
    z = Y[:, 0]
    if cyl.reps.shape[1] == 1:
        lo = z + (cyl.lo[:, 0] - cyl.reps[:, 0])
        hi = z + (cyl.hi[:, 0] - cyl.reps[:, 0])
    else:
        lo = hi = z
    return OffsetFamily(L, z, lo, hi)


def critical_values(L1: GraphLayout, L2: GraphLayout) -> tuple[np.ndarray, np.ndarray, bool]:
    """Critical points and values of ``D = h_2 - h_1`` over the common
    interval, and whether ``D`` is constant (parallel leaves)."""
    zero = np.array([0])

    def dD(rows, x):
        return L2.slope(zero[rows], x) - L1.slope(zero[rows], x)

    def d2D(rows, x):
        h = 1e-6
        return (dD(rows, x + h) - dD(rows, x - h)) / (2 * h)

    x = L1.start + L1.width * np.linspace(0.0, 1.0, 257)
    if np.max(np.abs(dD(zero, x[None, :]))) < 1e-12:
        return np.empty(0), np.empty(0), True
    roots = scalar_roots(dD, d2D, 1, L1.start, L1.start + L1.width, periodic=False)
    xs = roots.t
    y1 = L1.value(zero, x[:1][None, :])[0, 0]
    y2 = L2.value(zero, x[:1][None, :])[0, 0]
    D = L2.value(np.zeros(len(xs), int), xs[:, None])[:, 0] - L1.value(np.zeros(len(xs), int), xs[:, None])[:, 0]
    return xs, D - (y2 - y1), False


def _shift_range(lo, hi, periodic):
    return range(int(np.floor(lo)) - 1, int(np.ceil(hi)) + 2) if periodic else range(0, 1)


def _flag_pairs(F1: OffsetFamily, F2: OffsetFamily, values, periodic, slack):
    """Cylinder pairs ``(i, j)`` with ``z_1 - z_2 = c + n`` possible for a
    critical value ``c`` and integer ``n``: ``I_2[j]`` meets ``I_1[i] - c - n``.

    ``F2`` intervals are sorted and disjoint, so each query hits a
    contiguous block of ``j``; blocks are returned as ``(i, j_start, j_stop)``.
    """
    order = np.argsort(F2.lo, kind="stable")
    lo2, hi2 = F2.lo[order], F2.hi[order]
    blocks = []
    span_lo = min(F2.lo.min(), F1.lo.min())
    span_hi = max(F2.hi.max(), F1.hi.max())
    for c in values:
        for n in _shift_range(span_lo - span_hi - c, span_hi - span_lo - c, periodic):
            qa = F1.lo - c - n - slack
            qb = F1.hi - c - n + slack
            start = np.searchsorted(hi2, qa, side="left")
            stop = np.searchsorted(lo2, qb, side="right")
            hit = stop > start
            if np.any(hit):
                blocks.append((np.flatnonzero(hit), start[hit], stop[hit]))
    return order, blocks


def _expand(order, blocks, limit=MAX_FLAGGED_PAIRS):
    if not blocks:
        return np.empty(0, int), np.empty(0, int)
    total = sum(int(np.sum(b - a)) for _, a, b in blocks)
    if total > limit:
        raise ParameterError(f"{total} flagged cylinder pairs; lower the depth")
    ii, jj = [], []
    for i, a, b in blocks:
        n = b - a
        ii.append(np.repeat(i, n))
        jj.append(order[np.repeat(a, n) + (np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n))])
    pairs = np.unique(np.stack([np.concatenate(ii), np.concatenate(jj)], axis=1), axis=0)
    return pairs[:, 0], pairs[:, 1]


def representative_tangencies(L1: GraphLayout, L2: GraphLayout):
    """Tangent representative pairs of two offset families, or ``None``
    when the layouts are not offset families."""
    F1, F2 = offset_family(L1), offset_family(L2)
    if F1 is None or F2 is None:
        return None
    _, values, parallel = critical_values(L1, L2)
    periodic = L1.model.ambient == "torus"
    if parallel:
        values = np.zeros(1)  # h_2 - h_1 vanishes identically: coincidence
    point1 = OffsetFamily(L1, F1.z, F1.z, F1.z)
    point2 = OffsetFamily(L2, F2.z, F2.z, F2.z)
    order, blocks = _flag_pairs(point1, point2, values, periodic, REP_TOL)
    return _expand(order, blocks)


@dataclass(frozen=True)
class TangencySet:
    """Flagged tangencies and the transversal mass they can carry.

    ``product_bounds[d]`` is the product measure of flagged cylinder pairs
    at depth ``depths[d]``; ``marginal_bounds[d]`` holds the masses of the
    flagged cylinders of each model separately.  The verdict uses the
    larger marginal mass, since a null-transverse set has null saturation
    in each transversal.
    """

    records: list[IntersectionRecord]
    depths: list[int]
    product_bounds: list[float]
    marginal_bounds: list[tuple[float, float]]
    flagged: tuple[np.ndarray, np.ndarray] = field(repr=False)
    isolated: bool = True
    lower_bound: float | None = None

    @property
    def mass_bound(self) -> float:
        return max(self.marginal_bounds[-1]) if self.marginal_bounds else 0.0

    @property
    def product_bound(self) -> float:
        return self.product_bounds[-1] if self.product_bounds else 0.0

    @property
    def empty(self) -> bool:
        return len(self.flagged[0]) == 0 and not self.records

    def null_transverse(self, tol: float = NULL_TOLERANCE) -> bool:
        return self.isolated and self.mass_bound <= tol


def _marginals(m1, m2, d1, d2, i, j):
    w1, w2 = m1.cylinders(d1).masses, m2.cylinders(d2).masses
    return float(np.sum(w1[np.unique(i)])), float(np.sum(w2[np.unique(j)])), float(np.sum(w1[i] * w2[j]))


def detect_tangencies(m1, m2, depth: int | None = None, threshold: float = TANGENCY_THRESHOLD, depths=None) -> TangencySet:
    """Tangency set of two complementary models, or of a model and a
    coordinate subtorus, with mass bounds at each of ``depths`` (default
    ``1 .. depth``)."""
    if isinstance(m2, Subtorus):
        return _subtorus_tangencies(as_model(m1), m2, depth, threshold)
    m1, m2 = as_model(m1), as_model(m2)
    _check_complementary(m1, m2)
    d1, d2 = _depths(m1, m2, depth)
    final = max(d1, d2)
    depths = list(range(0, final + 1)) if depths is None else sorted(depths)
    layouts = compatible_layouts(m1, m2, d1, d2)
    fams = None
    if layouts is not None:
        fams = offset_family(layouts[0]), offset_family(layouts[1])
        if fams[0] is None or fams[1] is None:
            fams = None
    if fams is None:
        return _records_tangencies(m1, m2, d1, d2, threshold)
    L1, L2 = layouts
    xs, values, parallel = critical_values(L1, L2)
    periodic = m1.ambient == "torus"
    prod, marg = [], []
    flagged = (np.empty(0, int), np.empty(0, int))
    for d in depths:
        e1, e2 = min(d, d1), min(d, d2)
        F1 = offset_family(compatible_layouts(m1, m2, e1, e2)[0])
        F2 = offset_family(compatible_layouts(m1, m2, e1, e2)[1])
        vals = np.zeros(1) if parallel else values
        order, blocks = _flag_pairs(F1, F2, vals, periodic, INTERVAL_SLACK)
        i, j = _expand(order, blocks)
        mu1, mu2, pm = _marginals(m1, m2, e1, e2, i, j)
        prod.append(pm)
        marg.append((mu1, mu2))
        flagged = (i, j)
    if parallel and len(flagged[0]):
        raise TangencyError(
            "leaves of the two models coincide along whole arcs; tangencies are not isolated",
            pairs=len(flagged[0]),
        )
    records = _critical_records(m1, m2, L1, L2, xs, flagged, threshold)
    return TangencySet(records, depths, prod, marg, flagged, True, _inclusion_exclusion(m1, m2, fams, values, periodic))


def _critical_records(m1, m2, L1, L2, xs, flagged, threshold, limit=1000):
    """Records at the critical points for (a sample of) flagged pairs,
    placed on the representative leaf of the first model."""
    i, j = flagged
    if len(i) == 0 or len(xs) == 0:
        return []
    i, j = i[:limit], j[:limit]
    keys1, keys2 = m1.cylinders(L1.depth).keys, m2.cylinders(L2.depth).keys
    w1, w2 = m1.cylinders(L1.depth).masses, m2.cylinders(L2.depth).masses
    out = []
    for x in xs:
        xv = np.full((len(i), 1), x)
        F1 = m1.jacobian(L1.depth, i, L1.s_of(xv)[..., None])[:, 0]
        F2 = m2.jacobian(L2.depth, j, L2.s_of(xv)[..., None])[:, 0]
        margin, _ = frame_margin(F1, F2)
        y = L1.value(i, xv)[:, 0]
        for r in range(len(i)):
            point = np.array([x, y[r]])
            if m1.ambient == "torus":
                point = np.mod(point, 1.0)
            out.append(
                IntersectionRecord(point, keys1[i[r]], float(L1.s_of(x)), keys2[j[r]], float(L2.s_of(x)),
                                   0, float(margin[r]), bool(margin[r] >= threshold), float(w1[i[r]] * w2[j[r]]))
            )
    return out


def _inclusion_exclusion(m1, m2, fams, values, periodic) -> float | None:
    """``mu(K_1) + mu(K_2') - |hull|`` where ``K_2'`` is the second offset set
    moved by a critical value: when positive the two sets must meet in
    positive measure, so some tangent leaves carry that much mass."""
    if periodic or len(values) == 0:
        return None
    F1, F2 = fams
    best = None
    for c in values:
        lo = min(F1.lo.min(), F2.lo.min() + c)
        hi = max(F1.hi.max(), F2.hi.max() + c)
        lengths = []
        for m in (m1, m2):
            K = getattr(m, "transversal", None)
            lengths.append(K.limit_length() if K is not None and K.total_mass == K.limit_length() else 0.0)
        bound = lengths[0] + lengths[1] - (hi - lo)
        best = bound if best is None else max(best, bound)
    return best


def _records_tangencies(m1, m2, d1, d2, threshold) -> TangencySet:
    records = intersection_points(m1, m2, max(d1, d2), threshold)
    bad = [r for r in records if not r.transversal]
    keys1, keys2 = m1.cylinders(d1).keys, m2.cylinders(d2).keys
    i = np.array([keys1.index(r.addr1) for r in bad], dtype=int)
    j = np.array([keys2.index(r.addr2) for r in bad], dtype=int)
    mu1, mu2, pm = _marginals(m1, m2, d1, d2, i, j)
    return TangencySet(bad, [max(d1, d2)], [pm], [(mu1, mu2)], (i, j))


def _subtorus_tangencies(model, N: Subtorus, depth, threshold) -> TangencySet:
    depth = model.default_depth if depth is None else depth
    records = subtorus_records(model, N, depth, threshold)
    bad = [r for r in records if not r.transversal]
    keys = model.cylinders(depth).keys
    i = np.unique(np.array([keys.index(r.addr1) for r in bad], dtype=int))
    mass = float(np.sum(model.cylinders(depth).masses[i]))
    return TangencySet(bad, [depth], [mass], [(mass, 0.0)], (i, np.zeros(len(i), dtype=int)))


@dataclass(frozen=True)
class AePairing:
    value: float
    mass_bound: float
    excluded_mass: float
    flagged_pairs: int


def ae_pairing(m1, m2, depth: int | None = None, tol: float = NULL_TOLERANCE, threshold: float = TANGENCY_THRESHOLD) -> AePairing:
    """Signed count over cylinder pairs whose leaves avoid the tangency set,
    with the flagged mass as an error bar.  Refuses unless the tangency set
    is null-transverse up to ``tol``."""
    ts = detect_tangencies(m1, m2, depth, threshold)
    m1, m2 = as_model(m1), as_model(m2)
    if not ts.null_transverse(tol):
        details = {"mass_bound": ts.mass_bound}
        message = f"tangency set is not null-transverse: flagged leaves carry mass {ts.mass_bound:.6g} > {tol:g}"
        if ts.lower_bound is not None and ts.lower_bound > 0:
            details["lower_bound"] = ts.lower_bound
            message += (
                f"; the transversal sets have total measure exceeding their hull by {ts.lower_bound:.6g}, "
                "so positive-measure tangencies cannot be avoided"
            )
        raise ContractRefusal(message, **details)
    d1, d2 = _depths(m1, m2, depth)
    i, j = ts.flagged
    layouts = compatible_layouts(m1, m2, d1, d2)
    w1, w2 = m1.cylinders(d1).masses, m2.cylinders(d2).masses
    if layouts is not None and offset_family(layouts[0]) is not None and offset_family(layouts[1]) is not None:
        L1, L2 = layouts
        periodic = m1.ambient == "torus"
        total = _degree_sum(L1, L2, w1, w2, periodic)
        excluded = float(np.sum(w1[i] * w2[j] * pair_counts(L1, L2, i, j, periodic))) if len(i) else 0.0
        value = total - excluded
    else:
        records = intersection_points(m1, m2, max(d1, d2), threshold)
        skip = set(zip(i.tolist(), j.tolist()))
        keys1, keys2 = m1.cylinders(d1).keys, m2.cylinders(d2).keys
        kept = [r for r in records if (keys1.index(r.addr1), keys2.index(r.addr2)) not in skip and r.transversal]
        value = float(np.sum([r.mass * r.index for r in kept])) if kept else 0.0
    return AePairing(value, ts.mass_bound, ts.product_bound, len(i))
