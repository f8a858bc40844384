"""Certificate that two fat-Cantor solenoids stay tangent after a small
perturbation.

Horizontal lines ``y = a`` (``a`` in ``K1``) meet the perturbed parabolas
``y = x^2 + z + g(x, z)`` (``z`` in ``K2``) tangentially exactly when
``a = r(z)``, the minimum height of the parabola through ``z``.  Since
``r' = 1 + g_z`` stays close to one, ``r(K2)`` keeps most of the measure of
``K2``; once ``|K1| + |r(K2)|`` exceeds the length of their common hull the
two sets must meet.  A nested pair of overlapping cylinder images is
produced as an explicit witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..cantor import CantorTransversal
from ..errors import ParameterError

# slack for the floating evaluation of r at cylinder endpoints
IMAGE_SLACK = 1e-12


@dataclass(frozen=True)
class TrigPerturbation:
    """``g(x, z) = sum_t c_t cos(2 pi (p_t x + q_t z) + phase_t)``."""

    coeffs: tuple[float, ...]
    px: tuple[int, ...]
    qz: tuple[int, ...]
    phase: tuple[float, ...]

    @classmethod
    def random(cls, seed: int, sup: float = 0.01, terms: int = 4, max_freq: int = 2) -> "TrigPerturbation":
        rng = np.random.default_rng(seed)
        c = rng.uniform(-1.0, 1.0, terms)
        c *= sup / np.sum(np.abs(c))
        px = rng.integers(0, max_freq + 1, terms)
        qz = rng.integers(0, max_freq + 1, terms)
        phase = rng.uniform(0.0, 2 * math.pi, terms)
        return cls(tuple(c), tuple(int(v) for v in px), tuple(int(v) for v in qz), tuple(phase))

    def _arrays(self):
        return (np.array(self.coeffs), np.array(self.px), np.array(self.qz), np.array(self.phase))

    def __call__(self, x, z):
        c, p, q, ph = self._arrays()
        return float(np.sum(c * np.cos(2 * math.pi * (p * x + q * z) + ph)))

    def dx(self, x, z):
        c, p, q, ph = self._arrays()
        return float(np.sum(-c * 2 * math.pi * p * np.sin(2 * math.pi * (p * x + q * z) + ph)))

    def sup_bound(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    def bound(self, order_x: int, order_z: int) -> float:
        """Upper bound of ``|d^a_x d^b_z g|`` from the coefficients."""
        c, p, q, _ = self._arrays()
        return float(np.sum(np.abs(c) * (2 * math.pi * p) ** order_x * (2 * math.pi * q) ** order_z))


@dataclass(frozen=True)
class RemarkCertificate:
    seed: int
    sup_norm_bound: float
    slope_lower_bound: float
    measure_margin: float
    witness: tuple[str, str] | None
    witness_depth: int

    @property
    def certified(self) -> bool:
        return self.measure_margin > 0 and self.witness is not None


class VertexMap:
    """``r(z)``: the minimum over ``x`` of ``x^2 + z + g(x, z)``."""

    def __init__(self, g: TrigPerturbation):
        if g.bound(2, 0) >= 2.0:
            raise ParameterError("perturbation too large: parabolas may stop being convex")
        self.g = g
        self.reach = g.bound(1, 0) / (2.0 - g.bound(2, 0)) + 1e-9

    def vertex(self, z: float) -> float:
        f = lambda x: 2.0 * x + self.g.dx(x, z)  # noqa: E731
        return brentq(f, -self.reach - 1e-6, self.reach + 1e-6, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def __call__(self, z: float) -> float:
        x = self.vertex(z)
        return x * x + z + self.g(x, z)


def _overlap(a, b):
    return max(a[0], b[0]) <= min(a[1], b[1])


def remark_certificate(K1: CantorTransversal, K2: CantorTransversal, seed: int, sup: float = 0.01, depth: int | None = None) -> RemarkCertificate:
    """Certify ``K1 ∩ r(K2) ≠ ∅`` for the perturbation drawn from ``seed``."""
    g = TrigPerturbation.random(seed, sup)
    r = VertexMap(g)
    slope = 1.0 - g.bound(0, 1)
    if slope <= 0:
        raise ParameterError("perturbation too large: the vertex map may fold")
    leb1, leb2 = K1.limit_length(), K2.limit_length()
    lo = min(K1.lo, r(K2.lo) - IMAGE_SLACK)
    hi = max(K1.hi, r(K2.hi) + IMAGE_SLACK)
    margin = leb1 + slope * leb2 - (hi - lo)
    depth = min(K1.depth, K2.depth) if depth is None else depth
    witness = _witness(K1, K2, r, depth)
    return RemarkCertificate(seed, g.sup_bound(), slope, margin, witness, depth)


def _witness(K1, K2, r, depth):
    """Depth-first search for nested cylinders ``A`` of ``K1`` and ``B`` of
    ``K2`` with ``A`` meeting the interval hull of ``r(B)`` at every level."""
    cache = {}

    def image(addr):
        if addr not in cache:
            a, b = K2.interval(addr)
            cache[addr] = (r(a) - IMAGE_SLACK, r(b) + IMAGE_SLACK)
        return cache[addr]

    stack = [("", "")]
    while stack:
        a1, a2 = stack.pop()
        if len(a1) == depth:
            return a1, a2
        for c1 in "10":
            for c2 in "10":
                n1, n2 = a1 + c1, a2 + c2
                if _overlap(K1.interval(n1), image(n2)):
                    stack.append((n1, n2))
    return None
