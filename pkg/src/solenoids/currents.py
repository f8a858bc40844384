"""Generalised Ruelle-Sullivan currents of the models and their classes."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegreeError, ImmersionError, ParameterError
from .forms import (
    DifferentialForm,
    ThomForm,
    _shuffle_sign,
    basis_indices,
    evaluate,
    exterior_derivative,
    harmonic_basis,
)
from .models import RANK_TOL, Perturbation, PerturbedModel, SolenoidModel

# bounded working set for the vectorised leaf quadrature (points per chunk)
CHUNK_POINTS = 1 << 21


@dataclass(frozen=True)
class QuadratureSpec:
    """Leaf quadrature settings.

    ``order`` is the Gauss-Legendre order per panel (or the number of
    trapezoid nodes on closed leaves), ``panels`` subdivides each of the
    model's smooth pieces, ``depth`` defaults to the transversal depth and
    ``phase`` shifts the fundamental leaf domain to ``[phase, 1 + phase)``.
    """

    order: int = 64
    depth: int | None = None
    panels: int = 1
    phase: float = 0.0

    def __post_init__(self):
        if self.order < 2:
            raise ParameterError("quadrature order must be at least 2")
        if self.depth is not None and self.depth < 0:
            raise ParameterError("depth must be non-negative")
        if self.panels < 1:
            raise ParameterError("panel count must be positive")

    def depth_for(self, model) -> int:
        return model.default_depth if self.depth is None else self.depth


def leaf_rule(model: SolenoidModel, quad: QuadratureSpec, panels: int | None = None):
    """Nodes ``(Q, k)`` and weights ``(Q,)`` on the chart cube."""
    panels = quad.panels if panels is None else panels
    if model.rule == "trapezoid":
        count = quad.order * panels
        nodes1, weights1 = quad.phase + np.arange(count) / count, np.full(count, 1.0 / count)
    else:
        nodes1, weights1 = _gauss_panels(model.breakpoints, quad.order, panels, quad.phase)
    if model.k == 1:
        return nodes1[:, None], weights1
    grids = np.stack(np.meshgrid(*([nodes1] * model.k), indexing="ij"), axis=-1).reshape(-1, model.k)
    weights = np.ones(1)
    for _ in range(model.k):
        weights = np.outer(weights, weights1).ravel()
    return grids, weights


def _gauss_panels(breakpoints, order, panels, phase):
    x, w = np.polynomial.legendre.leggauss(order)
    cuts = {phase, 1.0 + phase}
    for b in breakpoints:
        for shifted in (b, b + 1.0):
            if phase < shifted < 1.0 + phase:
                cuts.add(shifted)
    cuts = sorted(cuts)
    nodes, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        edges = np.linspace(a, b, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            nodes.append(lo + half * (x + 1.0))
            weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _thom_panels(model, omega, quad) -> int:
    """Panels needed to resolve a bump of width ``rho`` along the leaves."""
    if not isinstance(omega, ThomForm):
        return quad.panels
    pieces = 1 if model.rule == "trapezoid" else max(1, len(model.breakpoints) - 1)
    needed = math.ceil(4.0 / (omega.rho * pieces))
    if needed > quad.panels and model.k == 1:
        warnings.warn(
            f"Thom width {omega.rho:g} is below the leaf resolution; refining to {needed} panels of order {quad.order}",
            stacklevel=3,
        )
        return needed
    return quad.panels


def leaf_integrals(model: SolenoidModel, omega, quad: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-cylinder leaf integrals of ``omega`` and the cylinder masses."""
    if omega.degree != model.k:
        raise DegreeError(f"a {omega.degree}-form cannot be integrated over {model.k}-dimensional leaves")
    depth = quad.depth_for(model)
    cyl = model.cylinders(depth)
    s, w = leaf_rule(model, quad, _thom_panels(model, omega, quad))
    C = len(cyl)
    out = np.empty(C)
    step = max(1, CHUNK_POINTS // max(1, len(w)))
    for start in range(0, C, step):
        idx = np.arange(start, min(C, start + step))
        points = model.lift(depth, idx, s)
        jac = model.jacobian(depth, idx, s)
        out[idx] = evaluate(omega, points, jac) @ w
    return out, cyl.masses


def evaluate_current(model: SolenoidModel, omega, quad: QuadratureSpec | None = None) -> float:
    """``sum_C mass(C) * integral of omega over the leaf piece of C``.

    The reduction runs over cylinders in address order with numpy's pairwise
    summation, so results are bit-reproducible.
    """
    integrals, masses = leaf_integrals(model, omega, quad or QuadratureSpec())
    return float(np.sum(masses * integrals))


@dataclass(frozen=True)
class HomologyClass:
    """Coefficients against ``harmonic_basis(n, k)``."""

    n: int
    k: int
    coefficients: np.ndarray = field(compare=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (math.comb(self.n, self.k),):
            raise DegreeError(f"expected {math.comb(self.n, self.k)} coefficients, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ParameterError("homology coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    def __getitem__(self, index: tuple[int, ...]) -> float:
        return float(self.coefficients[basis_indices(self.n, self.k).index(tuple(index))])

    def distance(self, other: "HomologyClass") -> float:
        if (self.n, self.k) != (other.n, other.k):
            raise DegreeError("classes live in different homology groups")
        return float(np.max(np.abs(self.coefficients - other.coefficients), initial=0.0))


def rs_class(model: SolenoidModel, quad: QuadratureSpec | None = None) -> HomologyClass:
    quad = quad or QuadratureSpec()
    values = [evaluate_current(model, form, quad) for form in harmonic_basis(model.n, model.k)]
    return HomologyClass(model.n, model.k, np.array(values))


def poincare_dual_pairing(c1: HomologyClass, c2: HomologyClass) -> float:
    """Intersection form of the torus on complementary classes."""
    if c1.n != c2.n or c1.k + c2.k != c1.n:
        raise DegreeError(f"degrees {c1.k} and {c2.k} are not complementary in dimension {c1.n}")
    full = set(range(c1.n))
    terms = []
    for I, value in zip(basis_indices(c1.n, c1.k), c1.coefficients):
        rest = tuple(sorted(full - set(I)))
        terms.append(_shuffle_sign(I, rest) * value * c2[rest])
    return float(np.sum(terms))


def stokes_residual(model: SolenoidModel, beta: DifferentialForm, quad: QuadratureSpec | None = None) -> float:
    if beta.degree != model.k - 1:
        raise DegreeError(f"need a {model.k - 1}-form, got degree {beta.degree}")
    return abs(evaluate_current(model, exterior_derivative(beta), quad))


@dataclass(frozen=True)
class HomotopySpec:
    """An explicit homotopy ``H(., t)`` of the immersion, sampled at
    ``checks`` times for the immersion test."""

    perturbation: Perturbation
    checks: int = 5

    def at(self, t: float) -> Perturbation:
        return self.perturbation.at(t)


def parse_homotopy(spec) -> HomotopySpec:
    spec = dict(spec)
    kind = spec.pop("kind", "none")
    checks = int(spec.pop("checks", 5))
    if "vector" in spec:
        spec["vector"] = tuple(float(v) for v in spec["vector"])
    allowed = {"vector", "amplitude", "i", "j", "center", "power"}
    unknown = set(spec) - allowed
    if unknown:
        raise ParameterError(f"unknown homotopy keys {sorted(unknown)}")
    return HomotopySpec(Perturbation(kind=kind, **spec), checks)


def _min_singular(model, depth, s) -> float:
    C = len(model.cylinders(depth))
    idx = np.unique(np.linspace(0, C - 1, min(C, 64)).astype(int))
    jac = model.jacobian(depth, idx, s)
    if jac.shape[-1] == 1:
        return float(np.min(np.linalg.norm(jac[..., 0], axis=-1)))
    return float(np.min(np.linalg.svd(jac, compute_uv=False)[..., -1]))


def homotopy_drift(model: SolenoidModel, H: HomotopySpec, quad: QuadratureSpec | None = None) -> float:
    """Max-norm change of the class between ``H(., 0)`` and ``H(., 1)``."""
    quad = quad or QuadratureSpec()
    depth = quad.depth_for(model)
    s, _ = leaf_rule(model, quad)
    for t in np.linspace(0.0, 1.0, max(2, H.checks)):
        moved = PerturbedModel(model, [H.at(t)])
        margin = _min_singular(moved, depth, s)
        if not margin > RANK_TOL:
            raise ImmersionError(f"homotopy stops being an immersion at t={t:g} (margin {margin:.3g})")
    start = rs_class(PerturbedModel(model, [H.at(0.0)]), quad)
    end = rs_class(PerturbedModel(model, [H.at(1.0)]), quad)
    return start.distance(end)


def class_drift(before: SolenoidModel, after: SolenoidModel, quad: QuadratureSpec | None = None) -> float:
    quad = quad or QuadratureSpec()
    return rs_class(before, quad).distance(rs_class(after, quad))


def linearity_defect(model, forms, coefficients, quad=None) -> float:
    """``|<C, sum a_i w_i> - sum a_i <C, w_i>|``; round-off only."""
    quad = quad or QuadratureSpec()
    combo = None
    for a, w in zip(coefficients, forms):
        combo = w.scale(a) if combo is None else combo + w.scale(a)
    separate = sum(float(a) * evaluate_current(model, w, quad) for a, w in zip(coefficients, forms))
    return abs(evaluate_current(model, combo, quad) - separate)


__all__ = [
    "QuadratureSpec",
    "HomologyClass",
    "HomotopySpec",
    "class_drift",
    "evaluate_current",
    "homotopy_drift",
    "leaf_integrals",
    "leaf_rule",
    "linearity_defect",
    "parse_homotopy",
    "poincare_dual_pairing",
    "rs_class",
    "stokes_residual",
]
