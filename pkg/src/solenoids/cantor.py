"""Cantor transversals, their cylinder measures and return maps.

A transversal is stored as a binary cylinder tree of finite depth.  A
cylinder is addressed by a string over ``"01"``; the empty string is the
root and ``"0"`` is always the left child.  Interval endpoints are computed
top-down on demand, so nothing of size ``2**depth`` is kept around unless a
whole level is requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AddressError, ConstructionError, ParameterError

MAX_DEPTH = 32
# levels are materialised as arrays; beyond this they would not fit in memory
MAX_LEVEL = 24

CONSTRUCTIONS = ("middle", "fat", "interval", "point")


def _check_address(addr: str) -> None:
    if not isinstance(addr, str) or any(ch not in "01" for ch in addr):
        raise AddressError(f"malformed cylinder address {addr!r}")


def _split(parent, frac_left):
    """Split ``parent`` mass so that ``left + right == parent`` exactly.

    The larger child is computed by multiplication and the smaller one by
    subtraction; Sterbenz's lemma makes that subtraction exact.
    """
    if frac_left >= 0.5:
        left = parent * frac_left
        right = parent - left
    else:
        right = parent * (1.0 - frac_left)
        left = parent - right
    return left, right


@dataclass(frozen=True)
class CantorTransversal:
    """Finite-depth binary Cantor tree with a measure on its cylinders.

    ``construction`` is one of

    * ``"middle"``: remove the open middle ``ratio`` fraction at every step;
    * ``"fat"``: remove a centred gap of length ``gap_scale * gap_base**-d``
      from every depth-``d-1`` interval (``d >= 1``);
    * ``"interval"``: dyadic halving of ``[lo, hi]`` with no gaps (a
      full-interval transversal);
    * ``"point"``: a single leaf, depth 0, located at ``lo``.

    ``measure`` is ``"bernoulli"`` (left-split probability ``p``),
    ``"lebesgue"`` (length of the depth-``depth`` intervals) or
    ``"weights"``, where ``weights[d]`` lists the depth-``d`` masses as
    declared.  Declared weights are not forced to be additive; see
    :func:`mass_additivity_violations`.
    ``total_mass`` is the root mass.
    """

    construction: str = "middle"
    depth: int = 0
    ratio: float = 1.0 / 3.0
    gap_scale: float = 0.8
    gap_base: float = 4.0
    lo: float = 0.0
    hi: float = 1.0
    measure: str = "bernoulli"
    p: float = 0.5
    total_mass: float = 1.0
    weights: tuple = ()
    _levels: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.construction not in CONSTRUCTIONS:
            raise ConstructionError(f"unknown construction {self.construction!r}")
        if not (0 <= self.depth <= MAX_DEPTH) or int(self.depth) != self.depth:
            raise ConstructionError(f"depth must be an integer in [0, {MAX_DEPTH}], got {self.depth}")
        if self.measure not in ("bernoulli", "lebesgue", "weights"):
            raise ConstructionError(f"unknown measure kind {self.measure!r}")
        if self.measure == "weights":
            self._check_weights()
        if not (0.0 < self.p < 1.0):
            raise ConstructionError(f"bernoulli parameter must lie in (0, 1), got {self.p}")
        if not self.total_mass > 0:
            raise ConstructionError("total mass must be positive")
        if self.construction == "middle" and not (0.0 < self.ratio < 1.0):
            raise ConstructionError(f"middle ratio must lie in (0, 1), got {self.ratio}")
        if self.construction == "point" and self.depth != 0:
            raise ConstructionError("a point transversal has depth 0")
        if self.construction != "point" and not self.hi > self.lo:
            raise ConstructionError("empty base interval")
        if self.construction == "fat":
            self._check_gap_schedule()

    def _check_weights(self) -> None:
        if len(self.weights) != self.depth + 1:
            raise ConstructionError(f"need declared masses for depths 0..{self.depth}, got {len(self.weights)} levels")
        for d, level in enumerate(self.weights):
            if len(level) != 2**d:
                raise ConstructionError(f"depth {d} needs {2**d} masses, got {len(level)}")
            if any(not m >= 0 for m in level):
                raise ConstructionError(f"negative or missing mass at depth {d}")
        object.__setattr__(self, "total_mass", float(self.weights[0][0]))

    def _check_gap_schedule(self) -> None:
        if self.gap_scale <= 0 or self.gap_base <= 2.0:
            raise ConstructionError("fat Cantor gaps need gap_scale > 0 and gap_base > 2")
        length = self.hi - self.lo
        for d in range(1, self.depth + 1):
            g = self.gap(d)
            if g >= length:
                raise ConstructionError(f"gap {g:.3g} at depth {d} exceeds interval length {length:.3g}")
            length = (length - g) / 2.0
        if self.limit_removed() >= (self.hi - self.lo):
            raise ConstructionError("gap schedule removes the whole interval")

    # -- geometry -----------------------------------------------------------

    def gap(self, d: int) -> float:
        """Length of each gap opened at depth ``d`` (fat construction)."""
        return self.gap_scale * self.gap_base ** (-d)

    def limit_removed(self) -> float:
        """Total length removed by the infinite fat-Cantor schedule."""
        q = 2.0 / self.gap_base
        return 0.5 * self.gap_scale * q / (1.0 - q)

    def limit_length(self) -> float:
        """Lebesgue measure of the limiting set."""
        if self.construction == "interval":
            return self.hi - self.lo
        if self.construction == "fat":
            return (self.hi - self.lo) - self.limit_removed()
        return 0.0

    def _children(self, a, b, d):
        """Child intervals created at depth ``d`` from parents ``[a, b]``."""
        length = b - a
        if self.construction == "middle":
            side = 0.5 * (1.0 - self.ratio) * length
        elif self.construction == "fat":
            side = 0.5 * (length - self.gap(d))
        else:
            side = 0.5 * length
        return (a, a + side), (b - side, b)

    def interval(self, addr: str) -> tuple[float, float]:
        """Closed interval ``[a, b]`` of the cylinder ``addr``."""
        self._check(addr)
        if self.construction == "point":
            return (self.lo, self.lo)
        a, b = self.lo, self.hi
        for d, ch in enumerate(addr, start=1):
            left, right = self._children(a, b, d)
            a, b = left if ch == "0" else right
        return (a, b)

    def level(self, d: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrays of left and right endpoints of all depth-``d`` cylinders,
        in address order."""
        if not 0 <= d <= self.depth:
            raise AddressError(f"depth {d} outside [0, {self.depth}]")
        if d > MAX_LEVEL:
            raise ParameterError(f"refusing to materialise 2**{d} cylinders")
        key = ("iv", d)
        if key not in self._levels:
            if self.construction == "point":
                a = np.array([self.lo])
                b = np.array([self.lo])
            else:
                a = np.array([self.lo])
                b = np.array([self.hi])
                for k in range(1, d + 1):
                    (la, lb), (ra, rb) = self._children(a, b, k)
                    a = np.stack([la, ra], axis=1).ravel()
                    b = np.stack([lb, rb], axis=1).ravel()
            self._levels[key] = (a, b)
        return self._levels[key]

    def representatives(self, d: int) -> np.ndarray:
        """Midpoints of the depth-``d`` cylinders."""
        a, b = self.level(d)
        return 0.5 * (a + b)

    def addresses(self, d: int) -> list[str]:
        if d == 0:
            return [""]
        return [format(i, f"0{d}b") for i in range(2 ** d)]

    def lebesgue_length(self, d: int | None = None) -> float:
        """Total length of the depth-``d`` intervals (default: full depth)."""
        a, b = self.level(self.depth if d is None else d)
        return float(np.sum(b - a))

    # -- measure ------------------------------------------------------------

    def _split_fraction(self) -> float:
        if self.measure == "bernoulli":
            return self.p
        # every construction here is mirror symmetric, so the depth-D length
        # below each node splits evenly between its two children
        return 0.5

    def mass(self, addr: str) -> float:
        """Measure of the cylinder ``addr``."""
        self._check(addr)
        if self.measure == "weights":
            return float(self.weights[len(addr)][int(addr, 2) if addr else 0])
        m = float(self.total_mass)
        f = self._split_fraction()
        for ch in addr:
            left, right = _split(m, f)
            m = left if ch == "0" else right
        return m

    def masses(self, d: int) -> np.ndarray:
        """Masses of all depth-``d`` cylinders, in address order."""
        if not 0 <= d <= self.depth:
            raise AddressError(f"depth {d} outside [0, {self.depth}]")
        if d > MAX_LEVEL:
            raise ParameterError(f"refusing to materialise 2**{d} cylinders")
        key = ("m", d)
        if key not in self._levels and self.measure == "weights":
            self._levels[key] = np.array(self.weights[d], dtype=float)
        if key not in self._levels:
            m = np.array([float(self.total_mass)])
            f = self._split_fraction()
            for _ in range(d):
                if f >= 0.5:
                    left = m * f
                    right = m - left
                else:
                    right = m * (1.0 - f)
                    left = m - right
                m = np.stack([left, right], axis=1).ravel()
            self._levels[key] = m
        return self._levels[key]

    def scaled(self, factor: float) -> "CantorTransversal":
        if self.measure == "weights":
            levels = tuple(tuple(m * factor for m in level) for level in self.weights)
            return _replace(self, weights=levels)
        return _replace(self, total_mass=self.total_mass * factor)

    def _check(self, addr: str) -> None:
        _check_address(addr)
        if len(addr) > self.depth:
            raise AddressError(f"address {addr!r} deeper than transversal depth {self.depth}")

    @property
    def is_atomic(self) -> bool:
        return self.construction == "point"


def _replace(obj, **changes):
    import dataclasses

    return dataclasses.replace(obj, **changes)


def build_cantor(spec: dict) -> CantorTransversal:
    """Build a transversal from a declarative mapping.

    Recognised keys: ``construction`` (``middle``/``fat``/``interval``/
    ``point``), ``depth``, ``ratio``, ``gap_scale``, ``gap_base``, ``lo``,
    ``hi``, ``at`` (point location) and ``measure``, which is either a kind
    string or a mapping ``{"kind": "bernoulli", "p": 0.3}`` /
    ``{"kind": "lebesgue", "normalized": false}``.  An un-normalised
    Lebesgue measure has total mass equal to the Lebesgue measure of the
    limiting set.
    """
    spec = dict(spec)
    construction = spec.pop("construction", "middle")
    measure = spec.pop("measure", "bernoulli")
    if isinstance(measure, str):
        measure = {"kind": measure}
    measure = dict(measure)
    kind = measure.pop("kind", "bernoulli")
    kwargs = dict(construction=construction, depth=int(spec.pop("depth", 0)), measure=kind)
    if "at" in spec:
        kwargs["lo"] = float(spec.pop("at"))
        kwargs["hi"] = kwargs["lo"] + 1.0
    for key in ("ratio", "gap_scale", "gap_base", "lo", "hi", "total_mass"):
        if key in spec:
            kwargs[key] = float(spec.pop(key))
    if kind == "bernoulli":
        kwargs["p"] = float(measure.pop("p", 0.5))
    if kind == "weights":
        levels = measure.pop("levels")
        kwargs["weights"] = tuple(tuple(float(m) for m in level) for level in levels)
        kwargs["depth"] = len(levels) - 1
    normalized = bool(measure.pop("normalized", True))
    if measure:
        raise ConstructionError(f"unknown measure keys {sorted(measure)}")
    if spec:
        raise ConstructionError(f"unknown transversal keys {sorted(spec)}")
    K = CantorTransversal(**kwargs)
    if kind == "lebesgue" and not normalized:
        length = K.limit_length()
        if length <= 0:
            raise ConstructionError("un-normalised Lebesgue measure needs a positive-measure set")
        K = K.scaled(length / K.total_mass)
    return K


def cylinder_measure(K: CantorTransversal, addr: str) -> float:
    return K.mass(addr)


# -- return maps --------------------------------------------------------------


@dataclass(frozen=True)
class ReturnMap:
    """Holonomy of a suspension: a bijection of depth-``d`` cylinders.

    ``kind`` is ``identity``, ``odometer`` (add one with carry, the first
    address digit being the least significant) or ``permutation``, in which
    case ``permutation[i]`` is the image index of the depth-``perm_depth``
    cylinder with index ``i``; deeper addresses keep their suffix.
    """

    kind: str = "identity"
    permutation: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("identity", "odometer", "permutation"):
            raise ConstructionError(f"unknown return map {self.kind!r}")
        if self.kind == "permutation":
            perm = tuple(int(i) for i in self.permutation)
            size = len(perm)
            if size == 0 or size & (size - 1) or sorted(perm) != list(range(size)):
                raise ConstructionError("permutation must be a bijection of 2**d cylinder indices")
            object.__setattr__(self, "permutation", perm)

    @property
    def perm_depth(self) -> int:
        return len(self.permutation).bit_length() - 1

    def __call__(self, addr: str) -> str:
        _check_address(addr)
        if self.kind == "identity" or not addr:
            return addr
        if self.kind == "odometer":
            digits = list(addr)
            for i, ch in enumerate(digits):
                if ch == "0":
                    digits[i] = "1"
                    return "".join(digits)
                digits[i] = "0"
            return "".join(digits)
        d = self.perm_depth
        if len(addr) < d:
            raise AddressError(f"permutation acts on depth {d}, address {addr!r} is shallower")
        head = format(self.permutation[int(addr[:d], 2)], f"0{d}b") if d else ""
        return head + addr[d:]

    def index_map(self, d: int) -> np.ndarray:
        """Image index of every depth-``d`` cylinder, in address order."""
        if d == 0:
            return np.zeros(1, dtype=np.int64)
        idx = np.arange(2 ** d, dtype=np.int64)
        if self.kind == "identity":
            return idx
        if self.kind == "odometer":
            # digit i of the address is bit (d-1-i) of the index, so the
            # least significant address digit is the most significant bit
            rev = _bit_reverse(idx, d)
            return _bit_reverse((rev + 1) % (2 ** d), d)
        return np.array([int(self(format(i, f"0{d}b")), 2) for i in range(2 ** d)], dtype=np.int64)

    def power(self, addr: str, k: int) -> str:
        for _ in range(k):
            addr = self(addr)
        return addr


def _bit_reverse(x: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros_like(x)
    for i in range(d):
        out |= ((x >> i) & 1) << (d - 1 - i)
    return out


def build_return_map(spec) -> ReturnMap:
    if spec is None:
        return ReturnMap()
    if isinstance(spec, str):
        return ReturnMap(kind=spec)
    spec = dict(spec)
    return ReturnMap(kind=spec.get("kind", "identity"), permutation=tuple(spec.get("permutation", ())))


def holonomy_invariance_deviation(K: CantorTransversal, h: ReturnMap, d: int) -> float:
    """Largest ``|mass(h(C)) - mass(C)|`` over depth-``d`` cylinders ``C``."""
    if not 0 <= d <= K.depth:
        raise AddressError(f"depth {d} outside [0, {K.depth}]")
    m = K.masses(d)
    return float(np.max(np.abs(m[h.index_map(d)] - m)))


def mass_additivity_violations(K: CantorTransversal, depth: int | None = None) -> list[str]:
    """Addresses of interior nodes whose mass differs from the children sum."""
    depth = K.depth if depth is None else depth
    bad = []
    for d in range(depth):
        parent = K.masses(d)
        child = K.masses(d + 1)
        diff = parent != child[0::2] + child[1::2]
        for i in np.flatnonzero(diff):
            bad.append(format(int(i), f"0{d}b") if d else "")
    return bad


def check_holonomy_invariance(K: CantorTransversal, h: ReturnMap, depths: Sequence[int]) -> float:
    return max(holonomy_invariance_deviation(K, h, d) for d in depths)
