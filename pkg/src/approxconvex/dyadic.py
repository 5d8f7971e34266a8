"""Exact dyadic rationals in [0, 1], binary digits, supports and support splitting."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Iterable, Sequence


@dataclass(frozen=True, order=False)
class DyadicRational:
    """The value ``numerator / 2**depth``, kept in lowest terms.

    Lowest terms means the numerator is odd, or the value is 0 with depth 0.
    Only values in [0, 1] are allowed.
    """

    numerator: int
    depth: int

    def __post_init__(self):
        m, d = self.numerator, self.depth
        if not isinstance(m, int) or not isinstance(d, int):
            raise TypeError("numerator and depth must be integers")
        if d < 0:
            raise ValueError(f"depth must be non-negative, got {d}")
        if m < 0 or m > (1 << d):
            raise ValueError(f"{m}/2^{d} is outside [0, 1]")
        if m == 0:
            d = 0
        else:
            tz = (m & -m).bit_length() - 1
            tz = min(tz, d)
            m >>= tz
            d -= tz
        object.__setattr__(self, "numerator", m)
        object.__setattr__(self, "depth", d)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.depth)

    def digit(self, i: int) -> int:
        """Binary digit ``i`` of the finite expansion (digit 0 is the integer part)."""
        if i < 0:
            raise ValueError("digit index must be non-negative")
        if i > self.depth:
            return 0
        return (self.numerator >> (self.depth - i)) & 1

    def digits(self) -> list[int]:
        """Positions ``i >= 0`` whose digit is 1, ascending."""
        m, d = self.numerator, self.depth
        return [d - p for p in range(m.bit_length() - 1, -1, -1) if (m >> p) & 1]

    def at_depth(self, d: int) -> int:
        """Numerator over ``2**d``; ``d`` must be at least ``self.depth``."""
        if d < self.depth:
            raise ValueError(f"cannot express {self} at depth {d}")
        return self.numerator << (d - self.depth)

    def __float__(self) -> float:
        return self.numerator / (1 << self.depth)

    def __str__(self) -> str:
        if self.depth == 0:
            return str(self.numerator)
        return f"{self.numerator}/{1 << self.depth}"

    def __lt__(self, other: DyadicRational) -> bool:
        return self.value < other.value


def make_dyadic(m: int, d: int) -> DyadicRational:
    return DyadicRational(m, d)


def as_dyadic(x) -> DyadicRational:
    """Convert an int, Fraction, float, string 'p/q' or DyadicRational."""
    if isinstance(x, DyadicRational):
        return x
    if isinstance(x, str):
        x = Fraction(x)
    q = Fraction(x)
    den = q.denominator
    if den & (den - 1):
        raise ValueError(f"{x} is not a dyadic rational")
    return DyadicRational(q.numerator, den.bit_length() - 1)


def is_dyadic(x) -> bool:
    den = Fraction(x).denominator
    return den & (den - 1) == 0


def frac(x) -> Fraction:
    """Fractional part ``x - floor(x)``."""
    q = Fraction(x)
    return q - floor(q)


@dataclass(frozen=True)
class DyadicSimplexPoint:
    """A point of the standard simplex whose coordinates are dyadic and sum to 1."""

    coords: tuple[DyadicRational, ...]

    def __post_init__(self):
        coords = tuple(as_dyadic(c) for c in self.coords)
        if not coords:
            raise ValueError("a simplex point needs at least one coordinate")
        if sum(c.value for c in coords) != 1:
            raise ValueError("coordinates must sum to exactly 1")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_values(cls, values: Iterable) -> DyadicSimplexPoint:
        return cls(tuple(as_dyadic(v) for v in values))

    @classmethod
    def from_numerators(cls, nums: Sequence[int], depth: int) -> DyadicSimplexPoint:
        return cls(tuple(DyadicRational(int(m), depth) for m in nums))

    @property
    def dim(self) -> int:
        return len(self.coords) - 1

    @property
    def depth(self) -> int:
        return max(c.depth for c in self.coords)

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(c.value for c in self.coords)

    def numerators(self, depth: int | None = None) -> tuple[int, ...]:
        d = self.depth if depth is None else depth
        return tuple(c.at_depth(d) for c in self.coords)

    def is_vertex(self) -> bool:
        return any(c.numerator == 1 and c.depth == 0 for c in self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __len__(self):
        return len(self.coords)

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.coords) + ")"


DyadicSupport = frozenset  # of (digit position j, coordinate index k)


def support(x: DyadicSimplexPoint) -> frozenset[tuple[int, int]]:
    return frozenset((j, k) for k, c in enumerate(x.coords) for j in c.digits())


def _halve_counts(a: dict[int, int]) -> tuple[dict[int, int], dict[int, int]]:
    """Split digit counts with sum(a_j / 2^j) == 1 into two halves of mass 1/2.

    Repeatedly merges two coins of the finest level into one of the next
    coarser level until only two halves remain, then undoes the merges,
    each time breaking one coarse coin back into two fine ones.
    """
    a = {j: c for j, c in a.items() if c}
    carries = []
    while a != {1: 2}:
        n = max(a)
        if n <= 1 or a[n] % 2:
            raise ValueError("digit counts do not describe a simplex point")
        a[n] -= 2
        if not a[n]:
            del a[n]
        a[n - 1] = a.get(n - 1, 0) + 1
        carries.append(n)
    b, c = {1: 1}, {1: 1}
    for n in reversed(carries):
        side = b if b.get(n - 1, 0) else c
        side[n - 1] -= 1
        side[n] = side.get(n, 0) + 2
    return b, c


def split_support(x: DyadicSimplexPoint) -> tuple[DyadicSimplexPoint, DyadicSimplexPoint]:
    """Return ``(y, z)`` with ``x = (y + z) / 2`` and disjoint digit supports."""
    if x.is_vertex():
        raise ValueError(f"{x} is a vertex and has no splitting")
    supp = sorted(support(x))
    counts: dict[int, int] = {}
    for j, _ in supp:
        counts[j] = counts.get(j, 0) + 1
    b, _ = _halve_counts(counts)
    d = x.depth
    y = [0] * len(x.coords)
    z = [0] * len(x.coords)
    taken: dict[int, int] = {}
    for j, k in supp:
        # doubling moves digit j up to digit j - 1
        bit = 1 << (d - j + 1)
        if taken.get(j, 0) < b.get(j, 0):
            taken[j] = taken.get(j, 0) + 1
            y[k] += bit
        else:
            z[k] += bit
    return (DyadicSimplexPoint.from_numerators(y, d), DyadicSimplexPoint.from_numerators(z, d))
