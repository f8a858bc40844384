"""Intersection points of leaf pieces and their indices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..forms import Subtorus
from ..models import LinearTorusFoliation, SolenoidModel, horizontal_circles, vertical_circle
from ..cantor import CantorTransversal

TANGENCY_THRESHOLD = 1e-6
GRID = 1024
ROOT_TOL = 1e-12
# a local extremum this close to a crossing level is a double root
DOUBLE_ROOT_TOL = 1e-10
CHUNK = 1 << 21


@dataclass(frozen=True)
class IntersectionRecord:
    point: np.ndarray
    addr1: str
    t1: float
    addr2: str
    t2: float
    index: int
    margin: float
    transversal: bool
    mass: float = 0.0


def frame_margin(F1: np.ndarray, F2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Margins and determinant signs of stacked unit-column frames.

    ``F1`` is ``(..., n, k1)`` and ``F2`` is ``(..., n, k2)`` with
    ``k1 + k2 == n``.
    """
    M = np.concatenate([F1, F2], axis=-1)
    M = M / np.linalg.norm(M, axis=-2, keepdims=True)
    margin = np.linalg.svd(M, compute_uv=False)[..., -1]
    return margin, np.sign(np.linalg.det(M)).astype(int)


def as_model(obj) -> SolenoidModel:
    """Coordinate circles of ``T^2`` as single-leaf models, oriented by the
    remaining coordinate."""
    if isinstance(obj, SolenoidModel):
        return obj
    if isinstance(obj, Subtorus):
        if obj.n != 2 or obj.codim != 1:
            raise ParameterError("only coordinate circles of T^2 can stand in for a solenoid")
        c = obj.centers[0]
        if obj.normal == (0,):
            return vertical_circle(c)
        return horizontal_circles(CantorTransversal("point", lo=c, hi=c + 1.0))
    raise ParameterError(f"cannot intersect with {type(obj).__name__}")


# -- scalar root engine ---------------------------------------------------------


@dataclass(frozen=True)
class Roots:
    row: np.ndarray
    t: np.ndarray
    level: np.ndarray
    tangent: np.ndarray  # double-root candidates found at an extremum


def _bisect(f, rows, a, b, target, increasing, iters):
    for _ in range(iters):
        mid = 0.5 * (a + b)
        above = f(rows, mid[:, None])[:, 0] >= target
        go_left = above == increasing
        b = np.where(go_left, mid, b)
        a = np.where(go_left, a, mid)
    return 0.5 * (a + b)


def scalar_roots(f, df, count: int, lo: float = 0.0, hi: float = 1.0, periodic: bool = True, grid: int = GRID) -> Roots:
    """All ``t in [lo, hi)`` with ``f(row, t)`` an integer (or zero when
    ``periodic`` is false), for rows ``0 .. count-1``.

    ``f`` and ``df`` map ``(rows (P,), t (P, Q))`` to ``(P, Q)`` arrays.
    Cells of a uniform grid are split at sign changes of ``df`` so every
    sub-cell is monotone; roots are then bracketed by integer levels and
    bisected.  Extrema lying within ``DOUBLE_ROOT_TOL`` of a level are
    returned as tangent double roots.
    """
    iters = int(np.ceil(np.log2((hi - lo) / grid / ROOT_TOL))) + 2
    out = {key: [] for key in ("row", "t", "level", "tangent")}
    tg = np.linspace(lo, hi, grid + 1)
    step = max(1, CHUNK // (grid + 1))
    for start in range(0, count, step):
        rows = np.arange(start, min(count, start + step))
        T = np.broadcast_to(tg, (len(rows), grid + 1))
        F = f(rows, T)
        D = df(rows, T)
        flip = np.sign(D[:, :-1]) * np.sign(D[:, 1:]) < 0
        er, ec = np.nonzero(flip)
        if len(er):
            ea = tg[ec].copy()
            eb = tg[ec + 1].copy()
            rising = D[er, ec] < 0  # derivative goes from negative to positive
            ext = _bisect(df, rows[er], ea, eb, 0.0, rising, iters)
            Fe = f(rows[er], ext[:, None])[:, 0]
        else:
            ext = Fe = np.empty(0)
        # monotone sub-cells: [a, b) with values Fa, Fb
        cell_r, cell_c = np.nonzero(~flip)
        sub_r = [cell_r, er, er]
        sub_a = [tg[cell_c], tg[ec], ext]
        sub_b = [tg[cell_c + 1], ext, tg[ec + 1]]
        sub_Fa = [F[cell_r, cell_c], F[er, ec], Fe]
        sub_Fb = [F[cell_r, cell_c + 1], Fe, F[er, ec + 1]]
        r, a, b, Fa, Fb = (np.concatenate(x) for x in (sub_r, sub_a, sub_b, sub_Fa, sub_Fb))
        inc = Fb >= Fa
        if periodic:
            first = np.where(inc, np.ceil(Fa), np.floor(Fb) + 1)
            last = np.where(inc, np.ceil(Fb) - 1, np.floor(Fa))
        else:
            hit = np.where(inc, (Fa <= 0) & (0 < Fb), (Fb < 0) & (0 <= Fa))
            first = np.where(hit, 0.0, 1.0)
            last = np.zeros_like(first)
        n = np.maximum(last - first + 1, 0).astype(int)
        keep = n > 0
        r, a, b, inc, first, n = r[keep], a[keep], b[keep], inc[keep], first[keep], n[keep]
        rep = np.repeat(np.arange(len(n)), n)
        offsets = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
        levels = first[rep] + offsets
        roots = _bisect(f, rows[r[rep]], a[rep].copy(), b[rep].copy(), levels, inc[rep], iters)
        row_ids = rows[r[rep]]
        # double roots sitting exactly on a level at an extremum
        if len(ext):
            near = np.round(Fe) if periodic else np.zeros_like(Fe)
            dbl = np.abs(Fe - near) < DOUBLE_ROOT_TOL
            if np.any(dbl):
                drow, dt, dlev = rows[er[dbl]], ext[dbl], near[dbl]
                clash = np.zeros(len(roots), dtype=bool)
                # f is flat to round-off within ~sqrt(tol) of a double root
                for rr, tt in zip(drow, dt):
                    clash |= (row_ids == rr) & (np.abs(roots - tt) < math.sqrt(DOUBLE_ROOT_TOL))
                roots, row_ids, levels = roots[~clash], row_ids[~clash], levels[~clash]
                out["row"].append(drow)
                out["t"].append(dt)
                out["level"].append(dlev)
                out["tangent"].append(np.ones(len(dt), dtype=bool))
        out["row"].append(row_ids)
        out["t"].append(roots)
        out["level"].append(levels)
        out["tangent"].append(np.zeros(len(roots), dtype=bool))
    if not out["row"]:
        return Roots(*(np.empty(0, dtype=d) for d in (int, float, float, bool)))
    row = np.concatenate(out["row"]).astype(int)
    t = np.concatenate(out["t"])
    order = np.lexsort((t, row))
    return Roots(row[order], t[order], np.concatenate(out["level"])[order], np.concatenate(out["tangent"])[order])


# -- graph layouts ----------------------------------------------------------------


@dataclass(frozen=True)
class GraphLayout:
    """Pieces of a model that are graphs over coordinate ``axis``:
    coordinate ``axis`` equals ``start + width * s`` on every piece."""

    model: SolenoidModel
    depth: int
    axis: int
    start: float
    width: float

    def s_of(self, x):
        return (x - self.start) / self.width

    def value(self, idx, x):
        """Other coordinate as a function of the graph coordinate."""
        p = self.model.lift(self.depth, idx, self.s_of(x)[..., None])
        return p[..., 1 - self.axis]

    def slope(self, idx, x):
        J = self.model.jacobian(self.depth, idx, self.s_of(x)[..., None])[..., 0]
        return J[..., 1 - self.axis] / J[..., self.axis]

    def ends(self, idx=None):
        """Lifted other-coordinate values at the two ends of every piece."""
        C = len(self.model.cylinders(self.depth))
        idx = np.arange(C) if idx is None else idx
        p = self.model.lift(self.depth, idx, np.array([[0.0], [1.0]]))
        return p[:, 0, 1 - self.axis], p[:, 1, 1 - self.axis]


def graph_layout(model: SolenoidModel, depth: int, axis: int | None = None) -> GraphLayout | None:
    """The graph structure of ``model`` if every piece is a graph over the
    same coordinate interval, else ``None``."""
    axis = model.graph_axis if axis is None else axis
    if axis is None or model.n != 2 or model.k != 1:
        return None
    C = len(model.cylinders(depth))
    probe = np.array([[0.0], [0.5], [1.0]])
    p = model.lift(depth, np.arange(C), probe)[..., axis]
    start, width = p[0, 0], p[0, 2] - p[0, 0]
    affine = np.allclose(p[..., 0], start, atol=1e-12) and np.allclose(p[..., 2] - p[..., 0], width, atol=1e-12)
    affine &= np.allclose(p[..., 1], start + 0.5 * width, atol=1e-12)
    if not affine or width <= 0:
        return None
    return GraphLayout(model, depth, axis, float(start), float(width))


def is_vertical(model: SolenoidModel) -> bool:
    """Pieces are full coordinate circles ``{x_1 = const}``."""
    return (
        isinstance(model, LinearTorusFoliation)
        and model.n == 2
        and model.k == 1
        and abs(model.V[0, 0]) < 1e-15
    )


def _unit_frames(model, depth, idx, s):
    J = model.jacobian(depth, idx, s)
    return J / np.linalg.norm(J, axis=-2, keepdims=True)


# -- intersection points ----------------------------------------------------------


def _build_records(m1, m2, depth1, depth2, i, s1, j, s2, tangent_hint, threshold):
    keys1 = m1.cylinders(depth1).keys
    keys2 = m2.cylinders(depth2).keys
    mass = m1.cylinders(depth1).masses[i] * m2.cylinders(depth2).masses[j]
    if len(i) == 0:
        return []
    F1 = m1.jacobian(depth1, i, s1[:, None, None])[:, 0]
    F2 = m2.jacobian(depth2, j, s2[:, None, None])[:, 0]
    margin, sign = frame_margin(F1, F2)
    points = m1.lift(depth1, i, s1[:, None, None])[:, 0]
    if m1.ambient == "torus":
        points = np.mod(points, 1.0)
    records = []
    for r in range(len(i)):
        ok = bool(margin[r] >= threshold) and not tangent_hint[r]
        records.append(
            IntersectionRecord(
                point=points[r],
                addr1=keys1[i[r]],
                t1=float(s1[r]),
                addr2=keys2[j[r]],
                t2=float(s2[r]),
                index=int(sign[r]) if ok else 0,
                margin=float(margin[r]),
                transversal=ok,
                mass=float(mass[r]),
            )
        )
    return records


def _pair_grid(C1, C2):
    i, j = np.meshgrid(np.arange(C1), np.arange(C2), indexing="ij")
    return i.ravel(), j.ravel()


def graph_pair_roots(L1: GraphLayout, L2: GraphLayout, i, j, periodic: bool):
    """Crossings of x-graph pieces ``i`` of ``L1`` with pieces ``j`` of
    ``L2`` over their common coordinate interval."""

    def f(rows, x):
        return L2.value(j[rows], x) - L1.value(i[rows], x)

    def df(rows, x):
        return L2.slope(j[rows], x) - L1.slope(i[rows], x)

    return scalar_roots(f, df, len(i), L1.start, L1.start + L1.width, periodic)


def _depth(m, depth):
    if depth is None:
        return m.default_depth
    # a full-interval transversal can be cut at any depth; a Cantor tree cannot
    bounded = getattr(m, "transversal", None) is not None
    return min(depth, m.default_depth) if bounded else depth


def _depths(m1, m2, depth):
    return _depth(m1, depth), _depth(m2, depth)


def intersection_points(m1, m2, depth: int | None = None, threshold: float = TANGENCY_THRESHOLD, pairs=None):
    """Intersection records of representative leaf pieces of every
    cylinder pair (or of the given ``(i, j)`` index arrays)."""
    m1, m2 = as_model(m1), as_model(m2)
    if m1.n != m2.n or m1.k + m2.k != m1.n:
        raise ParameterError("intersection points need complementary leaf dimensions in a common ambient")
    d1, d2 = _depths(m1, m2, depth)
    C1, C2 = len(m1.cylinders(d1)), len(m2.cylinders(d2))
    i, j = _pair_grid(C1, C2) if pairs is None else (np.asarray(pairs[0]), np.asarray(pairs[1]))
    if m1.n == 2:
        L1, L2 = graph_layout(m1, d1, 0), graph_layout(m2, d2, 0)
        if is_vertical(m2) and L1 is not None:
            return _vertical_records(m1, L1, m2, d1, d2, i, j, threshold)
        if is_vertical(m1) and L2 is not None:
            swapped = _vertical_records(m2, L2, m1, d2, d1, j, i, threshold)
            return [_swap(rec) for rec in swapped]
        if L1 is not None and L2 is not None:
            if m1.ambient != m2.ambient or not np.isclose(L1.start, L2.start) or not np.isclose(L1.width, L2.width):
                raise ParameterError("graph pieces must share their coordinate interval")
            roots = graph_pair_roots(L1, L2, i, j, m1.ambient == "torus")
            ii, jj = i[roots.row], j[roots.row]
            return _build_records(m1, m2, d1, d2, ii, L1.s_of(roots.t), jj, L2.s_of(roots.t), roots.tangent, threshold)
    if isinstance(m1, LinearTorusFoliation) and isinstance(m2, LinearTorusFoliation):
        return _linear_records(m1, m2, d1, d2, i, j, threshold)
    raise ParameterError(f"no intersection routine for {m1.family} x {m2.family} pieces")


def _swap(rec: IntersectionRecord) -> IntersectionRecord:
    return IntersectionRecord(rec.point, rec.addr2, rec.t2, rec.addr1, rec.t1, -rec.index, rec.margin, rec.transversal, rec.mass)


def _vertical_records(m1, L1, m2, d1, d2, i, j, threshold):
    """x-graph pieces against coordinate circles ``{x_1 = c}``: one crossing
    per piece pair."""
    c = m2.cylinders(d2).reps[j, 0] + m2.offset[0]
    x = L1.start + np.mod(c - L1.start, 1.0)
    s1 = L1.s_of(x)
    y = L1.value(i, x[:, None])[:, 0]
    base_y = m2.offset[1]
    s2 = np.mod(y - base_y, 1.0)
    return _build_records(m1, m2, d1, d2, i, s1, j, s2, np.zeros(len(i), dtype=bool), threshold)


def _linear_records(m1, m2, d1, d2, i, j, threshold):
    """Lattice solve ``b1 + S1 s = b2 + S2 u + m`` over ``m in Z^n``."""
    A = np.concatenate([m1.step, -m2.step], axis=1)
    if abs(np.linalg.det(A)) < 1e-14:
        return []
    Ainv = np.linalg.inv(A)
    b1 = m1._bases(d1, np.arange(len(m1.cylinders(d1))))
    b2 = m2._bases(d2, np.arange(len(m2.cylinders(d2))))
    # (s, u) in the unit cube means A (s, u) ranges over a parallelotope
    corners = np.array(np.meshgrid(*([[0.0, 1.0]] * A.shape[0]), indexing="ij")).reshape(A.shape[0], -1)
    image = A @ corners
    rows_i, rows_j, rows_s, rows_u = [], [], [], []
    for a, b in zip(i, j):
        delta = b1[a] - b2[b]
        lo = np.floor(image.min(axis=1) + delta) - 1
        hi = np.ceil(image.max(axis=1) + delta) + 1
        grid = np.stack(np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo, hi)], indexing="ij"), axis=-1).reshape(-1, A.shape[0])
        sol = (grid - delta) @ Ainv.T
        inside = np.all((sol >= 0.0) & (sol < 1.0), axis=1)
        for row in sol[inside]:
            rows_i.append(a)
            rows_j.append(b)
            rows_s.append(row[: m1.k])
            rows_u.append(row[m1.k :])
    if not rows_i:
        return []
    ii, jj = np.array(rows_i), np.array(rows_j)
    s1 = np.array(rows_s)
    s2 = np.array(rows_u)
    keys1, keys2 = m1.cylinders(d1).keys, m2.cylinders(d2).keys
    mass = m1.cylinders(d1).masses[ii] * m2.cylinders(d2).masses[jj]
    J1 = m1.jacobian(d1, ii[:1], s1[:1])[0, 0]
    J2 = m2.jacobian(d2, jj[:1], s2[:1])[0, 0]
    margin, sign = frame_margin(J1, J2)
    ok = bool(margin >= threshold)
    out = []
    for r in range(len(ii)):
        point = np.mod(b1[ii[r]] + m1.step @ s1[r], 1.0)
        out.append(
            IntersectionRecord(
                point, keys1[ii[r]], float(s1[r][0]), keys2[jj[r]], float(s2[r][0]),
                int(sign) if ok else 0, float(margin), ok, float(mass[r]),
            )
        )
    return out


def subtorus_roots(model: SolenoidModel, N: Subtorus, depth: int):
    """Crossings of every leaf piece of a 1-dimensional model with a
    codimension-one coordinate subtorus, found in the chart parameter."""
    if model.k != 1 or N.codim != 1 or N.n != model.n:
        raise ParameterError("need a 1-dimensional model and a codimension-one subtorus")
    j, c = N.normal[0], N.centers[0]

    def f(rows, s):
        return model.lift(depth, rows, s[..., None])[..., j] - c

    def df(rows, s):
        return model.jacobian(depth, rows, s[..., None])[..., j, 0]

    return scalar_roots(f, df, len(model.cylinders(depth)), 0.0, 1.0, periodic=True)


def subtorus_frames(N: Subtorus) -> np.ndarray:
    return np.eye(N.n)[:, list(N.tangent)]


def subtorus_records(model, N: Subtorus, depth: int | None = None, threshold: float = TANGENCY_THRESHOLD):
    depth = model.default_depth if depth is None else depth
    roots = subtorus_roots(model, N, depth)
    cyl = model.cylinders(depth)
    if len(roots.row) == 0:
        return []
    s = roots.t
    F1 = model.jacobian(depth, roots.row, s[:, None, None])[:, 0]
    F2 = np.broadcast_to(subtorus_frames(N), (len(s), N.n, N.n - 1))
    margin, sign = frame_margin(F1, F2)
    points = np.mod(model.lift(depth, roots.row, s[:, None, None])[:, 0], 1.0)
    out = []
    for r in range(len(s)):
        ok = bool(margin[r] >= threshold) and not roots.tangent[r]
        out.append(
            IntersectionRecord(
                points[r], cyl.keys[roots.row[r]], float(s[r]), "", float("nan"),
                int(sign[r]) if ok else 0, float(margin[r]), ok, float(cyl.masses[roots.row[r]]),
            )
        )
    return out
