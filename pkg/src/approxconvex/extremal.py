"""The constants kappa(n), the digit function H and the extremal function E on a simplex."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from mpmath import iv
from mpmath.libmp import to_rational

from .dyadic import DyadicRational, DyadicSimplexPoint, as_dyadic, frac, is_dyadic

NON_DYADIC = "non-dyadic"


def kappa(n: int) -> Fraction:
    if n < 0:
        raise ValueError("kappa is defined for n >= 0")
    if n == 0:
        return Fraction(0)
    m = n.bit_length() - 1
    return Fraction(m + 1) + Fraction(n, 1 << m)


def kappa_real(x: float) -> float:
    """Piecewise-linear extension of kappa with knots at the powers of two."""
    if not x > 0:
        raise ValueError(f"kappa_real needs x > 0, got {x}")
    _, e = math.frexp(x)
    m = e - 1
    return m + 1 + math.ldexp(x, -m)


@dataclass(frozen=True)
class Enclosure:
    """Closed interval ``[lo, hi]`` known to contain an exact value."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        if lo > hi:
            raise ValueError(f"empty enclosure [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def exact(cls, v) -> Enclosure:
        return cls(v, v)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, v) -> bool:
        return self.lo <= Fraction(v) <= self.hi

    def __add__(self, other):
        if isinstance(other, Enclosure):
            return Enclosure(self.lo + other.lo, self.hi + other.hi)
        v = Fraction(other)
        return Enclosure(self.lo + v, self.hi + v)

    __radd__ = __add__

    def scale(self, c) -> Enclosure:
        c = Fraction(c)
        if c < 0:
            raise ValueError("scale factor must be non-negative")
        return Enclosure(self.lo * c, self.hi * c)

    def __str__(self) -> str:
        return f"[{float(self.lo):.12g}, {float(self.hi):.12g}]"


def h_dyadic(x) -> Fraction:
    """H(x) = sum of i * x_i / 2^i over the finite binary expansion of x."""
    x = as_dyadic(x)
    m, d = x.numerator, x.depth
    total = 0
    p = 0
    while m:
        if m & 1:
            total += (d - p) << p
        m >>= 1
        p += 1
    return Fraction(total, 1 << d)


def h_numerators(nums, depth: int) -> np.ndarray:
    """Vectorised ``H(m / 2^depth) * 2^depth`` for an integer array ``nums``.

    The result is an exact integer array; int64 is used when it cannot
    overflow and Python ints (object dtype) otherwise.
    """
    nums = np.asarray(nums)
    if depth * (1 << depth) < 2**62 and nums.dtype != object:
        a = nums.astype(np.int64)
        out = np.zeros_like(a)
        for p in range(depth + 1):
            out += ((a >> p) & 1) * ((depth - p) << p)
        return out
    flat = [h_dyadic(DyadicRational(int(m), depth)) * (1 << depth) for m in nums.ravel()]
    return np.array([int(v) for v in flat], dtype=object).reshape(nums.shape)


def e_numerators(points, depth: int) -> np.ndarray:
    """Row-wise ``E * 2^depth`` for an integer array of simplex numerators."""
    return h_numerators(points, depth).sum(axis=-1)


def h_enclose(x, terms: int) -> Enclosure:
    """Enclose H(x) by the first ``terms + 1`` terms of sum <2^k x> / 2^k."""
    if terms < 1:
        raise ValueError("need at least one series term")
    q = Fraction(x)
    if not 0 <= q <= 1:
        raise ValueError(f"{x} is outside [0, 1]")
    lo = sum((frac(q * (1 << k)) / (1 << k) for k in range(terms + 1)), Fraction(0))
    return Enclosure(lo, lo + Fraction(1, 1 << terms))


def _coords(x) -> list:
    if isinstance(x, DyadicSimplexPoint):
        return list(x.values)
    return list(x)


def e_point(x, mode: str = "exact", terms: int = 40):
    """E(x) = sum of H over the coordinates of a simplex point.

    ``mode`` is ``exact`` (dyadic coordinates, exact sum 1, returns a
    Fraction), ``enclose`` (rational coordinates, returns an Enclosure) or
    ``float`` (float coordinates summing to 1 within 1e-12, returns a float).
    """
    cs = _coords(x)
    if any(Fraction(c) < 0 for c in cs):
        raise ValueError("coordinates must be non-negative")
    if mode == "exact":
        qs = [Fraction(c) if not isinstance(c, DyadicRational) else c.value for c in cs]
        if sum(qs) != 1:
            raise ValueError(f"coordinates sum to {sum(qs)}, not 1")
        return sum((h_dyadic(q) for q in qs), Fraction(0))
    if mode == "enclose":
        qs = [Fraction(c) if not isinstance(c, DyadicRational) else c.value for c in cs]
        if sum(qs) != 1:
            raise ValueError(f"coordinates sum to {sum(qs)}, not 1")
        total = Enclosure.exact(0)
        for q in qs:
            total = total + (Enclosure.exact(h_dyadic(q)) if is_dyadic(q) else h_enclose(q, terms))
        return total
    if mode == "float":
        fs = [float(c) for c in cs]
        if abs(math.fsum(fs) - 1.0) > 1e-12:
            raise ValueError(f"coordinates sum to {math.fsum(fs)!r}, not 1")
        # a float is a dyadic rational, so its H is exact before rounding
        return float(sum((h_dyadic(min(max(f, 0.0), 1.0)) for f in fs), Fraction(0)))
    raise ValueError(f"unknown mode {mode!r}")


def e_delta1(t) -> Fraction:
    """E on the segment, E(t, 1 - t), in closed form."""
    if t is NON_DYADIC or t == NON_DYADIC:
        return Fraction(2)
    t = as_dyadic(t)
    if t.numerator == 0:
        return Fraction(0)
    return 2 - Fraction(2, 1 << t.depth)


def _to_fraction(mpf_tuple) -> Fraction:
    p, q = to_rational(mpf_tuple)
    return Fraction(int(p), int(q))


def entropy_enclose(coords: Sequence) -> Enclosure:
    """Certified enclosure of sum x log2(1/x) over the coordinates (0 log 0 = 0)."""
    total = iv.mpf(0)
    for c in coords:
        q = Fraction(c)
        if q == 0:
            continue
        x = iv.mpf(q.numerator) / q.denominator
        total += -x * iv.log(x) / iv.log(2)
    lo, hi = total._mpi_
    return Enclosure(_to_fraction(lo), _to_fraction(hi))


def h_bounds_enclose(x) -> tuple[Enclosure, Enclosure, Enclosure]:
    """Enclosures of x log2(1/x), 2x + x log2(1/x) and 2x + log2(1/x) for 0 < x <= 1.

    The first is a lower bound for H, the other two are upper bounds; the
    middle one is the sharper form that sums to the entropy bound for E.
    """
    q = Fraction(x)
    if not 0 < q <= 1:
        raise ValueError("need 0 < x <= 1")
    ent = entropy_enclose([q])
    x_iv = iv.mpf(q.numerator) / q.denominator
    lo, hi = (-iv.log(x_iv) / iv.log(2))._mpi_
    log_inv = Enclosure(_to_fraction(lo), _to_fraction(hi))
    return ent, ent + 2 * q, log_inv + 2 * q


@dataclass(frozen=True)
class MaxWitness:
    point: DyadicSimplexPoint
    value: Fraction
    digit_counts: dict = field(compare=False)


def max_witness(n: int, depth: int) -> MaxWitness:
    """A dyadic point of the n-simplex whose E value approaches kappa(n) as depth grows.

    The first ``depth`` levels follow the maximising digit-count pattern.
    The remaining mass is then paid out greedily with at most one digit
    per coordinate on each further level, so every digit stays 0 or 1.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    m = n.bit_length() - 1
    r = n - (1 << m)
    if depth < m + 3:
        raise ValueError(f"depth {depth} too small for n={n}; need at least {m + 3}")
    levels: list[set[int]] = [set() for _ in range(n + 1)]
    for k in range(n - 2 * r):
        levels[k].add(m + 1)
    for j in range(m + 2, depth + 1):
        gap = (j - (m + 2)) % (n + 1)
        for k in range(n + 1):
            if k != gap:
                levels[k].add(j)
    rest = 1 - sum(Fraction(1, 1 << j) for ls in levels for j in ls)
    j = depth
    while rest:
        j += 1
        t = min(n + 1, int(rest * (1 << j)))
        for k in range(t):
            levels[k].add(j)
        rest -= Fraction(t, 1 << j)
    top = j
    nums = [sum(1 << (top - i) for i in ls) for ls in levels]
    point = DyadicSimplexPoint.from_numerators(nums, top)
    counts: dict[int, int] = {}
    for ls in levels:
        for i in ls:
            counts[i] = counts.get(i, 0) + 1
    value = e_point(point)
    return MaxWitness(point, value, dict(sorted(counts.items())))


def self_similar_map(k: int, x):
    """theta_k(x) = (e_k + x) / 2."""
    if isinstance(x, DyadicSimplexPoint):
        vals = list(x.values)
        if not 0 <= k < len(vals):
            raise ValueError(f"vertex index {k} out of range")
        vals = [v / 2 for v in vals]
        vals[k] += Fraction(1, 2)
        return DyadicSimplexPoint.from_values(vals)
    vals = [Fraction(v) / 2 for v in x]
    if not 0 <= k < len(vals):
        raise ValueError(f"vertex index {k} out of range")
    vals[k] += Fraction(1, 2)
    return tuple(vals)


def h_digit_bound(levels: Sequence[int]) -> Fraction:
    """sum i * l_i / 2^i for digit counts l_i at level i (index 0 is the units level)."""
    if any(c < 0 for c in levels):
        raise ValueError("digit counts must be non-negative")
    mass = sum(Fraction(c, 1 << i) for i, c in enumerate(levels))
    if mass > 1:
        raise ValueError(f"digit counts carry mass {mass} > 1")
    return sum((Fraction(i * c, 1 << i) for i, c in enumerate(levels)), Fraction(0))


def digit_mass(levels: Sequence[int]) -> Fraction:
    return sum((Fraction(c, 1 << i) for i, c in enumerate(levels)), Fraction(0))
