"""Intersections with coordinate subtori, Thom-form pairings and the
constructive perturbation to transversality."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..currents import QuadratureSpec, evaluate_current
from ..errors import ContractRefusal, ParameterError, PerturbationFailure, TangencyError
from ..forms import Subtorus, thom_form
from ..models import LinearTorusFoliation, PerturbedModel, SolenoidModel, ZeroSolenoid
from .records import GRID, TANGENCY_THRESHOLD, frame_margin, scalar_roots, subtorus_frames, subtorus_records


def intersect_submanifold(model: SolenoidModel, N: Subtorus, depth: int | None = None, threshold: float = TANGENCY_THRESHOLD):
    """The solenoid cut out on ``N`` with its inherited transversal measure.

    Complementary dimensions give a :class:`ZeroSolenoid` whose points carry
    the masses of their cylinders and the intersection signs.  A linear
    2-dimensional foliation of ``T^4`` cut by ``{x_j = c}`` gives a linear
    1-dimensional foliation of that 3-torus (coordinates with ``x_j``
    removed), oriented so that its current on a 1-form ``b`` equals the
    current of the original on ``tau ∧ b`` for a Thom form ``tau`` of ``N``.
    """
    if N.n != model.n:
        raise ParameterError("subtorus and model live in different tori")
    if model.k < N.codim:
        raise ParameterError("leaves are too small to meet the subtorus transversally")
    if model.k == N.codim:
        return _zero_solenoid(model, N, depth, threshold)
    if isinstance(model, LinearTorusFoliation) and model.k == 2 and N.codim == 1 and model.transversal is None:
        return _linear_slice(model, N, threshold)
    raise ParameterError(f"slicing {model.family} leaves of dimension {model.k} by codimension {N.codim} is not supported")


def _zero_solenoid(model, N, depth, threshold) -> ZeroSolenoid:
    depth = model.default_depth if depth is None else depth
    records = subtorus_records(model, N, depth, threshold)
    bad = [r for r in records if not r.transversal]
    if bad:
        raise TangencyError(
            f"leaf of cylinder {bad[0].addr1!r} is tangent to the subtorus (margin {bad[0].margin:.3g})",
            cylinder=bad[0].addr1,
        )
    if not records:
        return ZeroSolenoid(np.empty((0, model.n)), np.empty(0), np.empty(0), [], model.n)
    return ZeroSolenoid(
        np.array([r.point for r in records]),
        np.array([r.mass for r in records]),
        np.array([r.index for r in records], dtype=float),
        [r.addr1 for r in records],
        model.n,
    )


def _linear_slice(model: LinearTorusFoliation, N: Subtorus, threshold) -> LinearTorusFoliation:
    j = N.normal[0]
    V = model.V
    w = np.array([-V[j, 1], V[j, 0]])
    direction = V @ w  # tangent to N, lies in the leaf
    norm = np.linalg.norm(direction)
    if norm < threshold:
        key = model.cylinders(model.depth).keys[0]
        raise TangencyError(f"leaves are tangent to the subtorus (first cylinder {key!r})", cylinder=key)
    sign = (-1) ** j  # sign of the shuffle ({j}, rest) for the Thom form
    keep = [i for i in range(model.n) if i != j]
    d = sign * direction[keep] / norm
    offset = model.offset[keep]
    return LinearTorusFoliation(d[:, None], offset, None, model.depth, model.density * norm)


def pairing_via_thom(model: SolenoidModel, N: Subtorus, rhos, quad: QuadratureSpec | None = None) -> list[float]:
    """Currents of ``model`` on Thom forms of ``N`` of shrinking widths."""
    quad = quad or QuadratureSpec()
    return [evaluate_current(model, thom_form(N, float(rho)), quad) for rho in rhos]


# -- perturbation to transversality -----------------------------------------------


def box_bump(s, center: float, power: int):
    """Raised-cosine bump ``((1 + cos 2 pi (s - center)) / 2) ** power``:
    one at the box centre, a trigonometric polynomial of degree ``power``."""
    c = 0.5 * (1.0 + np.cos(2 * math.pi * (s - center)))
    dc = -math.pi * np.sin(2 * math.pi * (s - center))
    return c**power, power * c ** (power - 1) * dc


@dataclass
class LeafMoves:
    """Per-cylinder displacement ``sum_b bump_b(s) v[c, b]``."""

    depth: int
    boxes: int
    power: int
    n: int
    vectors: dict = field(default_factory=dict)  # cylinder index -> (boxes, n) array

    def centers(self):
        return (np.arange(self.boxes) + 0.5) / self.boxes

    def __call__(self, depth, idx, s):
        idx = np.asarray(idx)
        s = np.asarray(s, dtype=float)
        s = s[None] if s.ndim == 2 else s
        Q = s.shape[1]
        disp = np.zeros((len(idx), Q, self.n))
        ddisp = np.zeros((len(idx), Q, self.n, 1))
        if depth != self.depth or not self.vectors:
            return disp, ddisp
        for row, c in enumerate(idx):
            v = self.vectors.get(int(c))
            if v is None:
                continue
            srow = s[min(row, s.shape[0] - 1), :, 0]
            for b, center in enumerate(self.centers()):
                val, der = box_bump(srow, center, self.power)
                disp[row] += val[:, None] * v[b]
                ddisp[row, :, :, 0] += der[:, None] * v[b]
        return disp, ddisp


@dataclass(frozen=True)
class PerturbationResult:
    model: PerturbedModel
    moves: dict  # (cylinder address, box) -> vector
    min_margin: float
    delta: float
    samples: int

    @property
    def unchanged(self) -> bool:
        return not self.moves


def _leaf_margin(model, N: Subtorus, depth, c, near, grid=GRID):
    """Smallest transversality margin of leaf piece ``c`` against ``N``,
    with where it occurs.  A near-miss closer than ``near`` counts as zero."""
    j, center = N.normal[0], N.centers[0]
    rows = np.array([c])

    def f(r, s):
        return model.lift(depth, np.full(len(r), c), s[..., None])[..., j] - center

    def df(r, s):
        return model.jacobian(depth, np.full(len(r), c), s[..., None])[..., j, 0]

    roots = scalar_roots(f, df, 1, 0.0, 1.0, periodic=True, grid=grid)
    worst, where = math.inf, 0.0
    if len(roots.t):
        J = model.jacobian(depth, rows, roots.t[None, :, None])[0]
        F2 = np.broadcast_to(subtorus_frames(N), (len(roots.t), N.n, N.n - 1))
        margins, _ = frame_margin(J, F2)
        margins = np.where(roots.tangent, 0.0, margins)
        k = int(np.argmin(margins))
        worst, where = float(margins[k]), float(roots.t[k])
    s = (np.arange(grid) + 0.5) / grid
    p = f(rows, s[None, :])[0]
    gap = np.abs(p - np.round(p))
    minima = (gap <= np.roll(gap, 1)) & (gap <= np.roll(gap, -1)) & (gap < near)
    if np.any(minima) and worst > 0.0:
        # a near-miss without a bracketed crossing: no margin at all
        slope = np.abs(df(rows, s[None, :])[0])
        miss = minima & (gap > slope / grid)
        if np.any(miss):
            worst, where = 0.0, float(s[np.argmax(miss)])
    return worst, where


def perturb_to_transversality(
    model: SolenoidModel,
    N,
    eps: float,
    delta: float | None = None,
    seed: int = 0,
    retries: int = 100,
    boxes: int = 4,
    power: int = 8,
    depth: int | None = None,
) -> PerturbationResult:
    """Move clopen pieces of ``model`` off tangency with the subtorus ``N``.

    Each cylinder is a clopen piece; its leaf circle is covered by ``boxes``
    arcs with smooth bumps.  Boxes are visited in order; a box whose piece
    still has a near-zero of margin below ``delta`` gets a displacement
    ``bump(s) v`` with ``v`` uniform in the ball of radius ``eps / 2**i``,
    ``i`` counting the boxes perturbed so far.  Zero is tried first.
    """
    if isinstance(N, SolenoidModel):
        raise ContractRefusal(
            "perturbation is offered only against a submanifold; two solenoids with "
            "positive-measure tangencies cannot in general be perturbed apart"
        )
    if not isinstance(N, Subtorus) or N.codim != 1 or N.n != model.n or model.k != 1:
        raise ParameterError("need a 1-dimensional model and a codimension-one coordinate subtorus")
    if not eps > 0:
        raise ParameterError("perturbation budget must be positive")
    delta = eps / 10.0 if delta is None else float(delta)
    if delta > eps:
        raise ParameterError(f"margin target {delta:g} exceeds the budget {eps:g}")
    if getattr(model, "transversal", None) is None:
        raise ParameterError("perturbation needs a Cantor transversal")
    if model.rule != "trapezoid":
        raise ParameterError("perturbation boxes need closed leaf pieces")
    depth = model.default_depth if depth is None else depth
    rng = np.random.default_rng(seed)
    moves = LeafMoves(depth, boxes, power, model.n)
    current = PerturbedModel(model, leaf_moves=moves)
    keys = model.cylinders(depth).keys
    near = delta * delta
    used = 0
    perturbed = 0
    record = {}
    for c in range(len(keys)):
        margin, where = _leaf_margin(current, N, depth, c, near=near)
        if margin >= delta:
            continue
        vec = np.zeros((boxes, model.n))
        moves.vectors[c] = vec
        for b in range(boxes):
            margin, where = _leaf_margin(current, N, depth, c, near=near)
            if margin >= delta:
                break
            if not _in_box(where, b, boxes):
                continue
            radius = eps / 2**perturbed
            for _ in range(retries):
                used += 1
                v = _ball_sample(rng, model.n, radius)
                vec[b] = v
                margin, where = _leaf_margin(current, N, depth, c, near=near)
                if margin >= delta or not _in_box(where, b, boxes):
                    break
            else:
                raise PerturbationFailure(
                    f"box {b} of cylinder {keys[c]!r}: no sample within radius {radius:.3g} reached margin {delta:.3g} "
                    f"after {retries} tries",
                    cylinder=keys[c],
                    box=b,
                )
            record[(keys[c], b)] = vec[b].copy()
            perturbed += 1
        margin, _ = _leaf_margin(current, N, depth, c, near=near)
        if margin < delta:
            raise PerturbationFailure(f"cylinder {keys[c]!r} still has margin {margin:.3g} < {delta:.3g}", cylinder=keys[c])
    final = min((_leaf_margin(current, N, depth, c, near=near)[0] for c in range(len(keys))), default=math.inf)
    if not moves.vectors:
        current = PerturbedModel(model)
    return PerturbationResult(current, record, final, delta, used)


def _in_box(s, b, boxes):
    return int(math.floor(s * boxes)) % boxes == b


def _ball_sample(rng, n, radius):
    direction = rng.normal(size=n)
    direction /= np.linalg.norm(direction)
    return direction * radius * rng.random() ** (1.0 / n)
