"""Concrete immersed measured solenoids.

Every model exposes the same sampling surface.  At a working depth ``d`` the
transversal is cut into cylinders; each cylinder carries a representative
leaf piece parametrised by a chart ``s in [0, 1)^k`` (a fundamental leaf
domain: the pieces of all cylinders tile the solenoid up to the depth-``d``
approximation of the transversal).  ``lift`` returns points of the universal
cover ``R^n`` so that pieces are continuous; reduce mod 1 for torus points.
``jacobian`` is oriented: its columns are the leaf frame in the solenoid's
orientation, scaled by the chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from .cantor import CantorTransversal, ReturnMap
from .errors import ConstructionError, ImmersionError, ParameterError

RANK_TOL = 1e-9


@dataclass(frozen=True)
class CylinderSet:
    """Depth-``d`` cylinders of a transversal, in address order."""

    keys: list
    reps: np.ndarray  # (C, l) representative transversal coordinates
    masses: np.ndarray  # (C,)
    lo: np.ndarray  # (C, l)
    hi: np.ndarray  # (C, l)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))


def _cantor_cylinders(K: CantorTransversal, depth: int, scale: float = 1.0) -> CylinderSet:
    lo, hi = K.level(depth)
    return CylinderSet(
        keys=K.addresses(depth),
        reps=(0.5 * (lo + hi))[:, None],
        masses=K.masses(depth) * scale,
        lo=lo[:, None],
        hi=hi[:, None],
    )


class SolenoidModel:
    """Shared behaviour; subclasses fill in the chart geometry."""

    n: int
    k: int
    ambient: str = "torus"
    family: str = ""
    default_depth: int = 0
    rule: str = "gauss"
    breakpoints: tuple[float, ...] = (0.0, 1.0)

    def cylinders(self, depth: int) -> CylinderSet:
        cache = self.__dict__.get("_cylinder_cache")
        if cache is None:
            cache = {}
            object.__setattr__(self, "_cylinder_cache", cache)
        if depth not in cache:
            cache[depth] = self._build_cylinders(depth)
        return cache[depth]

    def _build_cylinders(self, depth: int) -> CylinderSet:
        raise NotImplementedError

    def lift(self, depth: int, idx, s) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, depth: int, idx, s) -> np.ndarray:
        raise NotImplementedError

    def locate(self, addr, t) -> tuple[int, int, np.ndarray]:
        raise NotImplementedError

    @property
    def graph_axis(self) -> int | None:
        """Coordinate that equals ``start + s`` along every piece, if any."""
        return None

    @property
    def uniquely_ergodic(self) -> bool:
        return False

    @property
    def transversal_depth(self) -> int:
        return self.default_depth

    def continuation(self, depth: int):
        """Cylinder where each piece's leaf continues, and the lattice shift
        between the end of the piece and the start of that continuation."""
        raise NotImplementedError(f"{self.family} leaves cannot be followed piecewise")

    def scaled(self, factor: float) -> "SolenoidModel":
        raise NotImplementedError

    # -- public point/frame API ------------------------------------------

    def leaf_point(self, addr, t) -> np.ndarray:
        depth, i, s = self.locate(addr, t)
        p = self.lift(depth, np.array([i]), np.atleast_2d(s))[0, 0]
        return _reduce(p, self.ambient)

    def leaf_frame(self, addr, t) -> np.ndarray:
        depth, i, s = self.locate(addr, t)
        J = self.jacobian(depth, np.array([i]), np.atleast_2d(s))[0, 0]
        check_rank(J, f"{self.family} at {addr!r}, t={t}")
        return orthonormal_frame(J)


def _rows(s) -> np.ndarray:
    """Chart parameters as ``(R, Q, k)``: ``R == 1`` when shared by every
    cylinder, otherwise one row of ``Q`` points per cylinder."""
    s = np.asarray(s, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.ndim == 2:
        s = s[None]
    return s


def _reduce(p, ambient):
    return np.mod(p, 1.0) if ambient == "torus" else np.asarray(p)


def check_rank(J: np.ndarray, where: str = "") -> float:
    smin = float(np.linalg.svd(J, compute_uv=False)[-1]) if J.size else 1.0
    if not smin > RANK_TOL:
        raise ImmersionError(f"leafwise differential loses rank ({smin:.3g}) {where}".strip())
    return smin


def orthonormal_frame(J: np.ndarray) -> np.ndarray:
    """Orientation-preserving orthonormalisation of the columns of ``J``."""
    Q, R = np.linalg.qr(J)
    return Q * np.sign(np.diag(R))


def _locate_cantor(K: CantorTransversal, addr: str, default_depth: int) -> tuple[int, int]:
    depth = len(addr) if addr or default_depth == 0 else default_depth
    if len(addr) == 0 and depth > 0:
        raise ParameterError("an address of the working depth is required")
    K.interval(addr)  # validates
    return depth, int(addr, 2) if addr else 0


# -- linear torus foliations ----------------------------------------------------


def unit_direction(*components: float) -> np.ndarray:
    v = np.asarray(components, dtype=float)
    return v / np.linalg.norm(v)


def slope_direction(alpha: float) -> np.ndarray:
    """Unit vector ``(1, alpha) / sqrt(1 + alpha**2)``."""
    return unit_direction(1.0, alpha)


@dataclass(frozen=True, eq=False)
class LinearTorusFoliation(SolenoidModel):
    """Leaves ``offset + y + V t`` on ``T^n``.

    ``V`` is ``n x k`` with orthonormal columns (the oriented leaf frame).
    The transversal is the coordinate subtorus ``{x_I = offset_I}`` for the
    ``k`` coordinates ``I`` maximising ``|det V_I|``; ``y`` ranges over the
    complementary coordinates.  With ``transversal=None`` it is the full
    ``(n-k)``-torus carrying ``density * |det V_I|`` times Lebesgue measure,
    which makes the product with leaf volume equal ``density`` times Lebesgue
    measure on ``T^n``.  A :class:`CantorTransversal` (only for ``n - k = 1``)
    puts its own masses on the leaves through its cylinders.
    """

    V: np.ndarray
    offset: np.ndarray = None
    transversal: CantorTransversal | None = None
    depth: int = 8
    density: float = 1.0
    family = "linear"

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if V.shape[0] == 1 and V.shape[1] > 1:
            V = V.T
        n, k = V.shape
        if not 1 <= k < n:
            raise ConstructionError(f"leaf dimension {k} invalid in T^{n}")
        if not np.allclose(V.T @ V, np.eye(k), atol=1e-9):
            raise ConstructionError("direction matrix must have orthonormal columns")
        offset = np.zeros(n) if self.offset is None else np.asarray(self.offset, dtype=float)
        if offset.shape != (n,):
            raise ConstructionError("offset has the wrong dimension")
        best = max(combinations(range(n), k), key=lambda I: abs(np.linalg.det(V[list(I), :])))
        det = float(np.linalg.det(V[list(best), :]))
        if self.transversal is not None:
            if n - k != 1:
                raise ConstructionError("Cantor transversals need codimension-one linear leaves")
            if self.transversal.depth < 0:
                raise ConstructionError("bad transversal")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "chart_index", best)
        object.__setattr__(self, "trans_index", tuple(i for i in range(n) if i not in best))
        object.__setattr__(self, "chart_det", det)
        # chart s = V_I t, so the piece map is s -> base + V V_I^{-1} s
        object.__setattr__(self, "step", V @ np.linalg.inv(V[list(best), :]))
        closed = np.allclose(self.step, np.round(self.step), atol=1e-12)
        object.__setattr__(self, "rule", "trapezoid" if closed else "gauss")

    @property
    def orientation(self) -> int:
        return 1 if self.chart_det > 0 else -1

    @property
    def default_depth(self) -> int:  # type: ignore[override]
        return self.transversal.depth if self.transversal is not None else self.depth

    @property
    def graph_axis(self):
        if self.k == 1 and self.n == 2:
            return self.chart_index[0]
        return None

    @property
    def is_closed(self) -> bool:
        return self.rule == "trapezoid"

    @property
    def uniquely_ergodic(self) -> bool:
        if self.transversal is not None:
            return self.transversal.is_atomic
        if self.n == 2 and self.k == 1:
            return not _is_rational(self.V[1, 0] / self.V[0, 0]) if self.V[0, 0] != 0 else False
        return False

    def scaled(self, factor):
        if self.transversal is not None:
            return replace(self, transversal=self.transversal.scaled(factor))
        return replace(self, density=self.density * factor)

    def _build_cylinders(self, depth: int) -> CylinderSet:
        if self.transversal is not None:
            return _cantor_cylinders(self.transversal, depth)
        l = self.n - self.k
        side = 2 ** depth
        grid = (np.arange(side) + 0.5) / side
        mesh = np.stack(np.meshgrid(*([grid] * l), indexing="ij"), axis=-1).reshape(-1, l)
        h = 0.5 / side
        width = 1.0 / side
        mass = self.density * abs(self.chart_det) * width ** l
        keys = ["|".join(format(int(round((c - h) * side)), f"0{depth}b") if depth else "" for c in row) for row in mesh]
        return CylinderSet(keys, mesh, np.full(len(mesh), mass), mesh - h, mesh + h)

    def _bases(self, depth, idx):
        reps = self.cylinders(depth).reps[idx]
        base = np.tile(self.offset, (len(idx), 1))
        base[:, list(self.trans_index)] += reps
        return base

    def lift(self, depth, idx, s):
        idx = np.asarray(idx)
        s = _rows(s)
        base = self._bases(depth, idx)
        return base[:, None, :] + s @ self.step.T

    def jacobian(self, depth, idx, s):
        s = _rows(s)
        J = self.step.copy()
        J[:, 0] *= self.orientation
        return np.broadcast_to(J, (len(np.asarray(idx)), s.shape[1], self.n, self.k)).copy()

    def locate(self, addr, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        depth, i = self._locate_addr(addr)
        s = self.V[list(self.chart_index), :] @ t
        return depth, i, s

    def _locate_addr(self, addr):
        if self.transversal is not None:
            return _locate_cantor(self.transversal, addr or "", self.default_depth if addr else 0)
        if not addr:
            return 0, 0
        keys = self.cylinders(self.depth).keys
        return self.depth, keys.index(addr)

    def leaf_point(self, addr, t):
        depth, i, _ = self.locate(addr, t)
        base = self._bases(depth, np.array([i]))[0]
        return np.mod(base + self.V @ np.atleast_1d(np.asarray(t, dtype=float)), 1.0)

    def leaf_frame(self, addr, t):
        return self.V.copy()

    def continuation(self, depth):
        if not self.is_closed:
            raise NotImplementedError("non-closed linear leaves are counted on the lattice")
        C = len(self.cylinders(depth))
        shift = np.tile(self.step @ np.ones(self.k), (C, 1))
        return np.arange(C), np.round(shift)


def _is_rational(x: float, max_den: int = 10_000, tol: float = 1e-10) -> bool:
    frac = Fraction(x).limit_denominator(max_den)
    return abs(float(frac) - x) < tol


def horizontal_circles(transversal: CantorTransversal, offset_x: float = 0.0) -> LinearTorusFoliation:
    return LinearTorusFoliation(np.array([[1.0], [0.0]]), np.array([offset_x, 0.0]), transversal)


def vertical_circle(x: float) -> LinearTorusFoliation:
    """The single closed leaf ``{x_1 = x}`` oriented upward, mass 1."""
    return LinearTorusFoliation(
        np.array([[0.0], [1.0]]), np.array([0.0, 0.0]), CantorTransversal("point", lo=float(x), hi=float(x) + 1)
    )


def kronecker(alpha: float, depth: int = 8, offset=(0.0, 0.0), density: float = 1.0) -> LinearTorusFoliation:
    """Line foliation of slope ``alpha`` with product measure = Lebesgue."""
    return LinearTorusFoliation(slope_direction(alpha)[:, None], np.asarray(offset, float), None, depth, density)


# -- leaf profiles --------------------------------------------------------------


@dataclass(frozen=True)
class Profile:
    """Leaf profile ``psi``.

    Periodic kind: ``winding * x + shift + sum_j a_j cos(2 pi j x) +
    b_j sin(2 pi j x)`` with ``cos = ((j, a_j), ...)``, ``sin = ((j, b_j), ...)``.
    Polynomial kind (plane only): ``poly`` holds coefficients, lowest first.
    """

    winding: int = 0
    shift: float = 0.0
    cos: tuple = ()
    sin: tuple = ()
    poly: tuple | None = None

    @property
    def periodic(self) -> bool:
        return self.poly is None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.poly is not None:
            return np.polynomial.polynomial.polyval(x, self.poly)
        y = self.winding * x + self.shift
        for j, a in self.cos:
            y = y + a * np.cos(2 * math.pi * j * x)
        for j, b in self.sin:
            y = y + b * np.sin(2 * math.pi * j * x)
        return y

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        if self.poly is not None:
            c = np.polynomial.polynomial.polyder(self.poly, order) if len(self.poly) > order else [0.0]
            return np.polynomial.polynomial.polyval(x, c)
        y = np.full(x.shape, float(self.winding) if order == 1 else 0.0)
        for terms, phase in ((self.cos, 0), (self.sin, 3)):
            for j, a in terms:
                w = 2 * math.pi * j
                # derivative of cos/sin advances the phase by a quarter turn
                y = y + a * w ** order * _trig(phase + order, w * x)
        return y

    def derivative_bound(self, order: int = 1) -> float:
        """Upper bound of ``|psi^(order)|`` over a period (periodic kind)."""
        if self.poly is not None:
            raise ParameterError("no global bound for polynomial profiles")
        b = abs(self.winding) if order == 1 else 0.0
        for j, a in tuple(self.cos) + tuple(self.sin):
            b += abs(a) * (2 * math.pi * j) ** order
        return b


def _trig(phase: int, theta):
    """``cos`` advanced by ``phase`` quarter turns of differentiation."""
    phase %= 4
    if phase == 0:
        return np.cos(theta)
    if phase == 1:
        return -np.sin(theta)
    if phase == 2:
        return -np.cos(theta)
    return np.sin(theta)


def parse_profile(spec) -> Profile:
    if spec is None:
        return Profile()
    spec = dict(spec)
    if "poly" in spec:
        return Profile(poly=tuple(float(c) for c in spec["poly"]))
    return Profile(
        winding=int(spec.get("winding", 0)),
        shift=float(spec.get("shift", 0.0)),
        cos=tuple((int(j), float(a)) for j, a in spec.get("cos", ())),
        sin=tuple((int(j), float(b)) for j, b in spec.get("sin", ())),
    )


# -- graph solenoids ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GraphSolenoid(SolenoidModel):
    """Leaves ``x -> (x, psi(x) + z)`` for ``z`` in a Cantor transversal.

    On the torus ``psi`` must be periodic up to an integer winding, so every
    leaf is closed.  In the plane the leaves are graphs over ``window``.
    """

    transversal: CantorTransversal
    profile: Profile = field(default_factory=Profile)
    ambient: str = "torus"
    window: tuple[float, float] = (0.0, 1.0)
    n = 2
    k = 1
    family = "graph"

    def __post_init__(self):
        if self.ambient not in ("torus", "plane"):
            raise ConstructionError(f"unknown ambient {self.ambient!r}")
        if self.ambient == "torus":
            if not self.profile.periodic:
                raise ConstructionError("torus graph solenoids need a periodic profile")
            object.__setattr__(self, "window", (0.0, 1.0))
        elif not self.window[1] > self.window[0]:
            raise ConstructionError("empty window")
        object.__setattr__(self, "rule", "trapezoid" if self.ambient == "torus" else "gauss")

    orientation = 1

    @property
    def default_depth(self) -> int:  # type: ignore[override]
        return self.transversal.depth

    @property
    def graph_axis(self):
        return 0

    @property
    def width(self) -> float:
        return self.window[1] - self.window[0]

    @property
    def uniquely_ergodic(self) -> bool:
        return self.transversal.is_atomic

    def scaled(self, factor):
        return replace(self, transversal=self.transversal.scaled(factor))

    def _build_cylinders(self, depth):
        return _cantor_cylinders(self.transversal, depth)

    def heights(self, depth) -> np.ndarray:
        return self.transversal.representatives(depth)

    def lift(self, depth, idx, s):
        s = _rows(s)[..., 0]
        z = self.heights(depth)[np.asarray(idx)]
        x = self.window[0] + self.width * s
        y = self.profile(x) + z[:, None]
        return np.stack([np.broadcast_to(x, y.shape), y], axis=-1)

    def jacobian(self, depth, idx, s):
        s = _rows(s)[..., 0]
        x = self.window[0] + self.width * s
        col = np.stack([np.ones_like(x), self.profile.derivative(x)], axis=-1) * self.width
        return np.broadcast_to(col[..., None], (len(np.asarray(idx)), x.shape[1], 2, 1)).copy()

    def locate(self, addr, t):
        depth, i = _locate_cantor(self.transversal, addr, self.default_depth)
        s = (np.atleast_1d(np.asarray(t, dtype=float)) - self.window[0]) / self.width
        return depth, i, s

    def leaf_point(self, addr, t):
        depth, i = _locate_cantor(self.transversal, addr, self.default_depth)
        x = float(np.asarray(t, dtype=float).reshape(-1)[0])
        p = np.array([x, float(self.profile(x)) + self.heights(depth)[i]])
        return _reduce(p, self.ambient)

    def continuation(self, depth):
        C = len(self.cylinders(depth))
        return np.arange(C), np.tile([1.0, float(self.profile.winding)], (C, 1))


# -- Cantor suspensions ---------------------------------------------------------


def smootherstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


def smootherstep_derivative(u):
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * u * u * (1.0 - u) ** 2, 0.0)


@dataclass(frozen=True, eq=False)
class CantorSuspension(SolenoidModel):
    """Suspension of a return map over a Cantor transversal, immersed in T^2.

    The leaf through cylinder ``a`` runs horizontally at height ``phi(a)``
    for ``t in [0, 1/2]`` and then moves smoothly to ``phi(h(a))`` by
    ``t = 1``, where it continues as the leaf of ``h(a)``.  ``phi`` is the
    cylinder midpoint.
    """

    transversal: CantorTransversal
    return_map: ReturnMap = field(default_factory=ReturnMap)
    n = 2
    k = 1
    family = "suspension"
    rule = "gauss"
    breakpoints = (0.0, 0.5, 1.0)
    orientation = 1

    @property
    def default_depth(self) -> int:  # type: ignore[override]
        return self.transversal.depth

    @property
    def graph_axis(self):
        return 0

    @property
    def uniquely_ergodic(self) -> bool:
        K = self.transversal
        if K.is_atomic:
            return True
        return self.return_map.kind == "odometer" and K.measure == "bernoulli" and K.p == 0.5

    def scaled(self, factor):
        return replace(self, transversal=self.transversal.scaled(factor))

    def _build_cylinders(self, depth):
        return _cantor_cylinders(self.transversal, depth)

    def _heights(self, depth, idx):
        phi = self.transversal.representatives(depth)
        nxt = self.return_map.index_map(depth)
        idx = np.asarray(idx)
        return phi[idx], phi[nxt[idx]]

    def lift(self, depth, idx, s):
        s = _rows(s)[..., 0]
        y0, y1 = self._heights(depth, idx)
        y = y0[:, None] + (y1 - y0)[:, None] * smootherstep(2.0 * s - 1.0)
        return np.stack([np.broadcast_to(s, y.shape), y], axis=-1)

    def jacobian(self, depth, idx, s):
        s = _rows(s)[..., 0]
        y0, y1 = self._heights(depth, idx)
        dy = (y1 - y0)[:, None] * 2.0 * smootherstep_derivative(2.0 * s - 1.0)
        dx = np.ones_like(dy)
        return np.stack([dx, dy], axis=-1)[..., None]

    def locate(self, addr, t):
        depth, _ = _locate_cantor(self.transversal, addr, self.default_depth)
        t = float(np.asarray(t, dtype=float).reshape(-1)[0])
        inverse = np.argsort(self.return_map.index_map(depth))
        i = int(addr, 2) if addr else 0
        nxt = self.return_map.index_map(depth)
        while t >= 1.0:
            i, t = int(nxt[i]), t - 1.0
        while t < 0.0:
            i, t = int(inverse[i]), t + 1.0
        return depth, i, np.array([t])

    def continuation(self, depth):
        nxt = self.return_map.index_map(depth)
        return nxt, np.tile([1.0, 0.0], (len(nxt), 1))


# -- 0-solenoids ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ZeroSolenoid:
    """Finitely many weighted signed points (a depth-``d`` 0-solenoid)."""

    points: np.ndarray
    masses: np.ndarray
    signs: np.ndarray
    keys: list = field(default_factory=list)
    ambient_dim: int = 0
    k = 0

    @property
    def n(self) -> int:
        return self.ambient_dim or self.points.shape[-1]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    @property
    def signed_mass(self) -> float:
        return float(np.sum(self.masses * self.signs))


# -- ambient perturbations and homotopies ----------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """Time-``t`` member of an explicit homotopy of the immersion.

    ``kind``:

    * ``translation``: ``p + t v``;
    * ``bump``: ``p + t * amplitude * b(p_j - center) e_i`` with the
      entire raised-cosine bump ``b(u) = ((1 + cos 2 pi u) / 2) ** power``;
    * ``shear``: ``p + t * amplitude * sin(2 pi p_j) e_i``.

    All are maps ``T^n -> T^n`` homotopic to the identity through the
    family ``t in [0, 1]``.
    """

    kind: str
    t: float = 1.0
    vector: tuple = ()
    amplitude: float = 0.0
    i: int = 1
    j: int = 0
    center: float = 0.0
    power: int = 4

    def __post_init__(self):
        if self.kind not in ("translation", "bump", "shear", "none"):
            raise ParameterError(f"unknown homotopy kind {self.kind!r}")

    def at(self, t: float) -> "Perturbation":
        return replace(self, t=float(t))

    def apply(self, points: np.ndarray, jac: np.ndarray):
        t = self.t
        if self.kind == "none" or t == 0.0:
            return points, jac
        if self.kind == "translation":
            return points + t * np.asarray(self.vector, dtype=float), jac
        pj = points[..., self.j]
        if self.kind == "bump":
            u = 2 * math.pi * (pj - self.center)
            c = 0.5 * (1.0 + np.cos(u))
            value = c ** self.power
            grad = self.power * c ** (self.power - 1) * (-0.5 * np.sin(u)) * 2 * math.pi
        else:
            value = np.sin(2 * math.pi * pj)
            grad = 2 * math.pi * np.cos(2 * math.pi * pj)
        out = points.copy()
        out[..., self.i] += t * self.amplitude * value
        new_jac = jac.copy()
        new_jac[..., self.i, :] += t * self.amplitude * grad[..., None] * jac[..., self.j, :]
        return out, new_jac


class PerturbedModel(SolenoidModel):
    """``base`` composed with ambient perturbations and/or per-cylinder leaf
    displacements.

    ``leaf_moves`` is a callable ``(depth, idx, s) -> (disp, ddisp)`` giving
    displacements ``(C, Q, n)`` and their chart derivatives ``(C, Q, n, k)``;
    it is how clopen-piece perturbations are represented.
    """

    def __init__(self, base: SolenoidModel, ambient_maps: Sequence[Perturbation] = (), leaf_moves=None):
        self.base = base
        self.ambient_maps = tuple(ambient_maps)
        self.leaf_moves = leaf_moves
        self.n = base.n
        self.k = base.k
        self.ambient = base.ambient
        self.family = base.family
        self.rule = base.rule
        self.breakpoints = base.breakpoints
        self.orientation = getattr(base, "orientation", 1)

    @property
    def default_depth(self):  # type: ignore[override]
        return self.base.default_depth

    @property
    def graph_axis(self):
        unchanged = not self.ambient_maps and self.leaf_moves is None
        return self.base.graph_axis if unchanged else None

    @property
    def uniquely_ergodic(self) -> bool:
        return self.base.uniquely_ergodic

    def cylinders(self, depth):
        return self.base.cylinders(depth)

    def _sample(self, depth, idx, s):
        s = _rows(s)
        p = self.base.lift(depth, idx, s)
        J = self.base.jacobian(depth, idx, s)
        if self.leaf_moves is not None:
            disp, ddisp = self.leaf_moves(depth, np.asarray(idx), s)
            p = p + disp
            J = J + ddisp
        for f in self.ambient_maps:
            p, J = f.apply(p, J)
        return p, J

    def lift(self, depth, idx, s):
        return self._sample(depth, idx, s)[0]

    def jacobian(self, depth, idx, s):
        return self._sample(depth, idx, s)[1]

    def locate(self, addr, t):
        return self.base.locate(addr, t)

    def leaf_point(self, addr, t):
        return SolenoidModel.leaf_point(self, addr, t)

    def leaf_frame(self, addr, t):
        return SolenoidModel.leaf_frame(self, addr, t)

    def continuation(self, depth):
        return self.base.continuation(depth)

    def scaled(self, factor):
        return PerturbedModel(self.base.scaled(factor), self.ambient_maps, self.leaf_moves)


def immersion_margin(model: SolenoidModel, depth: int, samples: int = 100, seed: int = 0) -> float:
    """Smallest leafwise singular value over random ``(cylinder, s)`` samples."""
    rng = np.random.default_rng(seed)
    C = len(model.cylinders(depth))
    idx = rng.integers(0, C, size=samples)
    s = rng.random((samples, model.k))
    worst = math.inf
    for i, si in zip(idx, s):
        J = model.jacobian(depth, np.array([i]), si[None, :])[0, 0]
        worst = min(worst, float(np.linalg.svd(J, compute_uv=False)[-1]))
    return worst
