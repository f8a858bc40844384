"""Differential forms on flat tori with trigonometric-polynomial coefficients.

Coefficients are stored exactly: a coefficient function is a finite sum of
terms ``(2*pi)**p * (a*cos(2*pi*xi.x) + b*sin(2*pi*xi.x))`` with integer
frequency ``xi``, integer power ``p`` and rational ``a``, ``b``
(:class:`fractions.Fraction`, which represents any binary float exactly).
Because ``2*pi`` is kept symbolic, ``d``, ``wedge`` and products are exact and
identities such as ``d(d(w)) == 0`` hold as equalities of data, not just up
to rounding.  Floats only appear when a form is evaluated at points.

Multi-indices are 0-based tuples: ``(0, 1)`` is ``dx1 ^ dx2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np
from scipy import integrate

from .errors import DegreeError, ParameterError

TWO_PI = 2.0 * math.pi


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _canonical(freq: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    """Flip ``freq`` so its first non-zero entry is positive; returns the
    sign applied (the sine part changes sign under the flip)."""
    for f in freq:
        if f > 0:
            return freq, 1
        if f < 0:
            return tuple(-g for g in freq), -1
    return freq, 1


class TrigPoly:
    """Exact trigonometric polynomial on ``R^n / Z^n``."""

    __slots__ = ("n", "terms", "_compiled")

    def __init__(self, n: int, terms: Mapping | None = None):
        self.n = n
        clean: dict[tuple[tuple[int, ...], int], tuple[Fraction, Fraction]] = {}
        for (freq, p), (a, b) in (terms or {}).items():
            freq = tuple(int(f) for f in freq)
            if len(freq) != n:
                raise ParameterError(f"frequency {freq} has wrong length for n={n}")
            freq, s = _canonical(freq)
            a, b = _frac(a), _frac(b) * s
            if not any(freq):
                b = Fraction(0)
            key = (freq, int(p))
            if key in clean:
                a0, b0 = clean[key]
                a, b = a0 + a, b0 + b
            clean[key] = (a, b)
        self.terms = {k: v for k, v in clean.items() if v[0] != 0 or v[1] != 0}
        self._compiled = None

    @classmethod
    def constant(cls, n: int, value=1) -> "TrigPoly":
        return cls(n, {((0,) * n, 0): (value, 0)})

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, TrigPoly) and self.n == other.n and self.terms == other.terms

    def __repr__(self) -> str:
        return f"TrigPoly(n={self.n}, terms={len(self.terms)})"

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        merged = dict(self.terms)
        for k, (a, b) in other.terms.items():
            a0, b0 = merged.get(k, (Fraction(0), Fraction(0)))
            merged[k] = (a0 + a, b0 + b)
        return TrigPoly(self.n, merged)

    def scale(self, c) -> "TrigPoly":
        c = _frac(c)
        return TrigPoly(self.n, {k: (a * c, b * c) for k, (a, b) in self.terms.items()})

    def __neg__(self) -> "TrigPoly":
        return self.scale(-1)

    def __mul__(self, other: "TrigPoly") -> "TrigPoly":
        out: dict = {}

        def put(freq, p, a, b):
            freq, s = _canonical(freq)
            key = (freq, p)
            a0, b0 = out.get(key, (Fraction(0), Fraction(0)))
            out[key] = (a0 + a, b0 + b * s)

        half = Fraction(1, 2)
        for (f1, p1), (a1, b1) in self.terms.items():
            for (f2, p2), (a2, b2) in other.terms.items():
                p = p1 + p2
                fsum = tuple(x + y for x, y in zip(f1, f2))
                fdif = tuple(x - y for x, y in zip(f1, f2))
                put(fsum, p, half * (a1 * a2 - b1 * b2), half * (b1 * a2 + a1 * b2))
                put(fdif, p, half * (a1 * a2 + b1 * b2), half * (b1 * a2 - a1 * b2))
        return TrigPoly(self.n, out)

    def partial(self, j: int) -> "TrigPoly":
        """Exact partial derivative in ``x_j`` (one more power of 2*pi)."""
        out = {}
        for (freq, p), (a, b) in self.terms.items():
            xi = freq[j]
            if xi:
                out[(freq, p + 1)] = (xi * b, -xi * a)
        return TrigPoly(self.n, out)

    def _arrays(self):
        if self._compiled is None:
            if not self.terms:
                self._compiled = (np.zeros((0, self.n)), np.zeros(0), np.zeros(0))
            else:
                keys = sorted(self.terms)
                freqs = np.array([k[0] for k in keys], dtype=float)
                scale = np.array([TWO_PI ** k[1] for k in keys])
                a = np.array([float(self.terms[k][0]) for k in keys]) * scale
                b = np.array([float(self.terms[k][1]) for k in keys]) * scale
                self._compiled = (freqs, a, b)
        return self._compiled

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        freqs, a, b = self._arrays()
        if freqs.shape[0] == 0:
            return np.zeros(pts.shape[:-1])
        theta = TWO_PI * (pts @ freqs.T)
        return np.cos(theta) @ a + np.sin(theta) @ b


def _insert_sign(j: int, index: tuple[int, ...]) -> int:
    """Sign of moving ``dx_j`` from the front into sorted position."""
    return -1 if sum(1 for i in index if i < j) % 2 else 1


def _shuffle_sign(first: tuple[int, ...], second: tuple[int, ...]) -> int:
    inversions = sum(1 for i in first for j in second if i > j)
    return -1 if inversions % 2 else 1


@dataclass(frozen=True, eq=False)
class DifferentialForm:
    """A ``k``-form on ``T^n``: map from sorted multi-index to coefficient."""

    n: int
    degree: int
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.degree <= self.n:
            raise DegreeError(f"degree {self.degree} impossible on T^{self.n}")
        clean = {}
        for index, coeff in self.terms.items():
            index = tuple(int(i) for i in index)
            if len(index) != self.degree or list(index) != sorted(set(index)):
                raise DegreeError(f"multi-index {index} is not strictly increasing of length {self.degree}")
            if any(i < 0 or i >= self.n for i in index):
                raise DegreeError(f"multi-index {index} out of range for n={self.n}")
            if not isinstance(coeff, TrigPoly):
                coeff = TrigPoly.constant(self.n, coeff)
            if coeff:
                clean[index] = clean[index] + coeff if index in clean else coeff
        object.__setattr__(self, "terms", {k: v for k, v in sorted(clean.items()) if v})

    exact = True

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DifferentialForm)
            and (self.n, self.degree) == (other.n, other.degree)
            and self.terms == other.terms
        )

    def __repr__(self) -> str:
        return f"DifferentialForm(n={self.n}, degree={self.degree}, indices={list(self.terms)})"

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        _same_space(self, other)
        merged = dict(self.terms)
        for k, v in other.terms.items():
            merged[k] = merged[k] + v if k in merged else v
        return DifferentialForm(self.n, self.degree, merged)

    def __sub__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self + other.scale(-1)

    def scale(self, c) -> "DifferentialForm":
        return DifferentialForm(self.n, self.degree, {k: v.scale(c) for k, v in self.terms.items()})

    def d(self) -> "DifferentialForm":
        return exterior_derivative(self)

    def components(self, points):
        return [(index, coeff(points)) for index, coeff in self.terms.items()]


def _same_space(a, b) -> None:
    if (a.n, a.degree) != (b.n, b.degree):
        raise DegreeError("forms live in different spaces")


def zero_form(n: int, degree: int) -> DifferentialForm:
    return DifferentialForm(n, degree, {})


def exterior_derivative(omega: DifferentialForm) -> DifferentialForm:
    if not getattr(omega, "exact", True):
        # closed by construction (Thom forms); d is known to vanish
        return zero_form(omega.n, omega.degree + 1)
    if omega.degree >= omega.n:
        raise DegreeError(f"d of a top-degree form on T^{omega.n}")
    out: dict[tuple[int, ...], TrigPoly] = {}
    for index, coeff in omega.terms.items():
        for j in range(omega.n):
            if j in index:
                continue
            dc = coeff.partial(j)
            if not dc:
                continue
            new = tuple(sorted(index + (j,)))
            term = dc.scale(_insert_sign(j, index))
            out[new] = out[new] + term if new in out else term
    return DifferentialForm(omega.n, omega.degree + 1, out)


def wedge(alpha: DifferentialForm, beta: DifferentialForm) -> DifferentialForm:
    if alpha.n != beta.n:
        raise DegreeError("forms on different tori")
    if alpha.degree + beta.degree > alpha.n:
        raise DegreeError(f"wedge degree {alpha.degree + beta.degree} exceeds n={alpha.n}")
    out: dict[tuple[int, ...], TrigPoly] = {}
    for I, c in alpha.terms.items():
        for J, e in beta.terms.items():
            if set(I) & set(J):
                continue
            K = tuple(sorted(I + J))
            term = (c * e).scale(_shuffle_sign(I, J))
            out[K] = out[K] + term if K in out else term
    return DifferentialForm(alpha.n, alpha.degree + beta.degree, out)


def _minors(frame: np.ndarray, index: tuple[int, ...]) -> np.ndarray:
    sub = frame[..., list(index), :]
    k = len(index)
    if k == 0:
        return np.ones(frame.shape[:-2])
    if k == 1:
        return sub[..., 0, 0]
    if k == 2:
        return sub[..., 0, 0] * sub[..., 1, 1] - sub[..., 0, 1] * sub[..., 1, 0]
    return np.linalg.det(sub)


def evaluate(omega, points, frames) -> np.ndarray:
    """Value of ``omega`` at ``points`` on the ordered ``frames``.

    ``points`` has shape ``(..., n)`` and ``frames`` shape ``(..., n, k)``;
    the result is ``sum_I c_I(p) * det(frame rows I)``.
    """
    points = np.asarray(points, dtype=float)
    frames = np.asarray(frames, dtype=float)
    if frames.shape[-1] != omega.degree:
        raise DegreeError(f"{omega.degree}-form evaluated on {frames.shape[-1]} vectors")
    total = np.zeros(points.shape[:-1])
    for index, values in omega.components(points):
        total = total + values * _minors(frames, index)
    return total


def harmonic_basis(n: int, k: int) -> list[DifferentialForm]:
    """Constant forms ``dx_I``, ``|I| = k``, lexicographically ordered."""
    if not 0 <= k <= n:
        raise DegreeError(f"no {k}-forms on T^{n}")
    return [DifferentialForm(n, k, {I: TrigPoly.constant(n)}) for I in combinations(range(n), k)]


def basis_indices(n: int, k: int) -> list[tuple[int, ...]]:
    return list(combinations(range(n), k))


def constant_form(n: int, k: int, coefficients) -> DifferentialForm:
    """``sum_I c_I dx_I`` with ``coefficients`` ordered like :func:`harmonic_basis`."""
    return DifferentialForm(n, k, dict(zip(basis_indices(n, k), coefficients)))


def random_trig_form(
    n: int, k: int, rng: np.random.Generator, max_freq: int = 3, n_terms: int = 3
) -> DifferentialForm:
    terms: dict = {}
    for I in combinations(range(n), k):
        poly = {}
        for _ in range(n_terms):
            freq = tuple(int(f) for f in rng.integers(-max_freq, max_freq + 1, size=n))
            poly[(freq, 0)] = (float(rng.normal()), float(rng.normal()))
        terms[I] = TrigPoly(n, poly)
    return DifferentialForm(n, k, terms)


def parse_form(n: int, spec: Mapping) -> DifferentialForm:
    """Build a form from ``{"degree": k, "terms": [{"index": [...],
    "coefficients": [{"freq": [...], "cos": a, "sin": b}, ...]}]}``.

    A term may give ``"constant": c`` instead of ``coefficients``.
    """
    degree = int(spec["degree"])
    terms: dict = {}
    for item in spec.get("terms", []):
        index = tuple(int(i) for i in item["index"])
        if "constant" in item:
            poly = TrigPoly.constant(n, float(item["constant"]))
        else:
            poly = TrigPoly(
                n,
                {
                    (tuple(c["freq"]), 0): (float(c.get("cos", 0.0)), float(c.get("sin", 0.0)))
                    for c in item["coefficients"]
                },
            )
        terms[index] = terms[index] + poly if index in terms else poly
    return DifferentialForm(n, degree, terms)


# -- Thom forms ---------------------------------------------------------------


def _bump_kernel(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


_BUMP_INTEGRAL = integrate.quad(
    lambda u: math.exp(-1.0 / (1.0 - u * u)) if abs(u) < 1 else 0.0, -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200
)[0]


def bump_profile(s, rho: float) -> np.ndarray:
    """Periodic unit-integral bump of half-width ``rho`` centred at 0."""
    s = np.asarray(s, dtype=float)
    s = s - np.floor(s + 0.5)
    return _bump_kernel(s / rho) / (rho * _BUMP_INTEGRAL)


@dataclass(frozen=True)
class ThomForm:
    """``sign * prod_j b_rho(x_j - c_j) dx_J`` for the subtorus
    ``N = {x_j = c_j, j in J}``.

    ``sign`` is the sign of the shuffle ``(J, J^c)``, so that on a frame
    ``F`` the form gives ``det[F | e_{J^c}]``-oriented crossings positive
    weight.  The coefficients depend only on ``x_J``, so the form is closed;
    it is not a trigonometric polynomial and ``d`` of it is returned as the
    analytic zero.
    """

    n: int
    normal: tuple[int, ...]
    centers: tuple[float, ...]
    rho: float
    exact = False

    @property
    def degree(self) -> int:
        return len(self.normal)

    @property
    def sign(self) -> int:
        rest = tuple(i for i in range(self.n) if i not in self.normal)
        return _shuffle_sign(self.normal, rest)

    def coefficient(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        value = np.full(pts.shape[:-1], float(self.sign))
        for j, c in zip(self.normal, self.centers):
            value = value * bump_profile(pts[..., j] - c, self.rho)
        return value

    def components(self, points):
        return [(self.normal, self.coefficient(points))]

    def d(self) -> DifferentialForm:
        return exterior_derivative(self)

    def in_tube(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        inside = np.ones(pts.shape[:-1], dtype=bool)
        for j, c in zip(self.normal, self.centers):
            s = pts[..., j] - c
            inside &= np.abs(s - np.floor(s + 0.5)) < self.rho
        return inside


@dataclass(frozen=True)
class Subtorus:
    """``{x_j = c_j for j in normal}`` inside ``T^n``, oriented by the
    remaining coordinate directions in increasing order."""

    n: int
    normal: tuple[int, ...]
    centers: tuple[float, ...]

    def __post_init__(self):
        normal = tuple(int(j) for j in self.normal)
        if list(normal) != sorted(set(normal)) or any(j < 0 or j >= self.n for j in normal):
            raise ParameterError(f"bad normal coordinates {normal}")
        if len(self.centers) != len(normal):
            raise ParameterError("one center per normal coordinate")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))

    @property
    def codim(self) -> int:
        return len(self.normal)

    @property
    def tangent(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if i not in self.normal)


def thom_form(N: Subtorus, rho: float) -> ThomForm:
    if not 0.0 < rho < 0.25:
        raise ParameterError(f"Thom width must lie in (0, 1/4), got {rho}")
    return ThomForm(N.n, N.normal, N.centers, float(rho))


def forms_from(items: Iterable[Mapping], n: int) -> list[DifferentialForm]:
    return [parse_form(n, item) for item in items]
