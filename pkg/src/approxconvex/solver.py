"""The midpoint operator S on dyadic simplex grids and its monotone fixed-point iterations."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from math import comb, gcd
from typing import Sequence

import numpy as np

from .dyadic import DyadicSimplexPoint
from .extremal import Enclosure, e_point, entropy_enclose, kappa

_INT64_SAFE = 1 << 61


def _compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``.

    Rows are in lexicographic order.
    """
    rows = np.zeros((1, 0), dtype=np.int64)
    used = np.zeros(1, dtype=np.int64)
    for _ in range(parts - 1):
        room = total - used + 1
        rep = np.repeat(np.arange(len(rows)), room)
        # position of each new row within its parent's block gives the next coordinate
        nxt = np.arange(len(rep)) - np.repeat(np.cumsum(room) - room, room)
        rows = np.column_stack([rows[rep], nxt])
        used = used[rep] + nxt
    return np.column_stack([rows, total - used]).astype(np.int64)


class DyadicGrid:
    """All points of the n-simplex whose coordinates are multiples of 2^-depth.

    Points are stored as integer numerators over ``2**depth``.  The midpoint
    decompositions ``x = (y + z) / 2`` with ``y != z`` inside the grid are
    precomputed and grouped by ``x`` so that S can be applied with one
    vectorised reduction.
    """

    def __init__(self, dim: int, depth: int):
        if dim < 0 or depth < 0:
            raise ValueError("dim and depth must be non-negative")
        self.dim = dim
        self.depth = depth
        self.scale = 1 << depth
        self.points = _compositions(self.scale, dim + 1)
        self._keys = self._encode(self.points)
        order = np.argsort(self._keys)
        self._sorted_keys = self._keys[order]
        self._sorted_idx = order
        self.vertex_index = [self.index(tuple(self.scale if i == k else 0 for i in range(dim + 1)))
                             for k in range(dim + 1)]
        self.is_vertex = np.zeros(len(self.points), dtype=bool)
        self.is_vertex[self.vertex_index] = True
        self.face_dim = (self.points > 0).sum(axis=1) - 1
        self._build_pairs()

    def __len__(self) -> int:
        return len(self.points)

    def _encode(self, pts: np.ndarray) -> np.ndarray:
        base = self.scale + 1
        key = np.zeros(len(pts), dtype=np.int64)
        for k in range(self.dim):
            key = key * base + pts[:, k]
        return key

    def indices(self, pts: np.ndarray) -> np.ndarray:
        keys = self._encode(np.asarray(pts, dtype=np.int64).reshape(-1, self.dim + 1))
        pos = np.searchsorted(self._sorted_keys, keys)
        return self._sorted_idx[pos]

    def index(self, numerators: Sequence[int]) -> int:
        if sum(numerators) != self.scale or len(numerators) != self.dim + 1 or min(numerators) < 0:
            raise KeyError(f"{tuple(numerators)} is not on this grid")
        return int(self.indices(np.array([numerators]))[0])

    def point(self, i: int) -> DyadicSimplexPoint:
        return DyadicSimplexPoint.from_numerators(self.points[i].tolist(), self.depth)

    def _build_pairs(self):
        ys, zs, xs = [], [], []
        parity = self.points & 1
        pkey = np.zeros(len(self.points), dtype=np.int64)
        for k in range(self.dim + 1):
            pkey = pkey * 2 + parity[:, k]
        for cls in np.unique(pkey):
            members = np.flatnonzero(pkey == cls)
            if len(members) < 2:
                continue
            a, b = np.triu_indices(len(members), k=1)
            y, z = members[a], members[b]
            mid = (self.points[y] + self.points[z]) // 2
            ys.append(y)
            zs.append(z)
            xs.append(self.indices(mid))
        if ys:
            y, z, x = np.concatenate(ys), np.concatenate(zs), np.concatenate(xs)
        else:
            y = z = x = np.zeros(0, dtype=np.int64)
        order = np.argsort(x, kind="stable")
        self.pair_y, self.pair_z, self.pair_x = y[order], z[order], x[order]
        # start offsets of each midpoint's block, for minimum/maximum.reduceat
        self.pair_targets, self.pair_starts = np.unique(self.pair_x, return_index=True)

    @property
    def n_pairs(self) -> int:
        return len(self.pair_x)


def _lcm(values) -> int:
    return reduce(lambda a, b: a * b // gcd(a, b), values, 1)


@dataclass
class GridFunction:
    """Exact values ``nums / den`` on every point of a grid.

    ``phi`` holds the prescribed values at the vertices.  Solver outputs
    also fill in ``iterations``, ``converged`` and ``residual``.
    """

    grid: DyadicGrid
    nums: np.ndarray
    den: int
    phi: tuple[Fraction, ...]
    iterations: int = 0
    converged: bool = True
    residual: Fraction = Fraction(0)
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._normalize()

    def _normalize(self):
        nums = self.nums
        if nums.dtype == object and self.den and _fits(nums):
            nums = nums.astype(np.int64)
        while self.den % 2 == 0 and len(nums) and not np.any(nums % 2):
            nums = nums // 2
            self.den //= 2
        self.nums = nums

    def value(self, i: int) -> Fraction:
        return Fraction(int(self.nums[i]), self.den)

    def values(self) -> list[Fraction]:
        return [Fraction(int(v), self.den) for v in self.nums]

    def at(self, numerators: Sequence[int]) -> Fraction:
        return self.value(self.grid.index(numerators))

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.values()])

    def rescaled(self, den: int) -> np.ndarray:
        """Numerators over a multiple ``den`` of the current denominator."""
        if den % self.den:
            raise ValueError("target denominator must be a multiple")
        f = den // self.den
        nums = self.nums.astype(object) * f
        return nums.astype(np.int64) if _fits(nums) else nums

    def same_values(self, other: GridFunction) -> bool:
        return self.den == other.den and np.array_equal(self.nums, other.nums)


def _fits(nums) -> bool:
    if len(nums) == 0:
        return True
    return max(abs(int(np.max(nums))), abs(int(np.min(nums)))) < _INT64_SAFE


def _common(f: GridFunction, g: GridFunction) -> tuple[np.ndarray, np.ndarray, int]:
    den = _lcm([f.den, g.den])
    return f.rescaled(den), g.rescaled(den), den


def _phi_tuple(grid: DyadicGrid, phi) -> tuple[Fraction, ...]:
    if phi is None:
        return (Fraction(0),) * (grid.dim + 1)
    phi = tuple(Fraction(v) for v in phi)
    if len(phi) != grid.dim + 1:
        raise ValueError(f"need {grid.dim + 1} vertex values, got {len(phi)}")
    return phi


def _from_fractions(grid, vals: Sequence[Fraction], phi) -> GridFunction:
    den = _lcm(v.denominator for v in vals)
    nums = np.array([int(v * den) for v in vals], dtype=object)
    return GridFunction(grid, nums, den, phi)


def affine_function(grid: DyadicGrid, phi=None) -> GridFunction:
    """The affine interpolation of the vertex values over the grid."""
    phi = _phi_tuple(grid, phi)
    den = _lcm(v.denominator for v in phi) * grid.scale
    w = np.array([int(v * den) for v in phi], dtype=object)
    nums = grid.points.astype(object) @ w // grid.scale
    return GridFunction(grid, nums, den, phi)


def grid_function(grid: DyadicGrid, values: Sequence, phi=None) -> GridFunction:
    vals = [Fraction(v) for v in values]
    if len(vals) != len(grid):
        raise ValueError("one value per grid point is required")
    if phi is None:
        phi = tuple(vals[i] for i in grid.vertex_index)
    return _from_fractions(grid, vals, _phi_tuple(grid, phi))


def e_function(grid: DyadicGrid) -> GridFunction:
    """E restricted to the grid, computed directly from the digits."""
    from .extremal import e_numerators

    nums = e_numerators(grid.points, grid.depth)
    return GridFunction(grid, np.asarray(nums), grid.scale, _phi_tuple(grid, None))


def s_step(f: GridFunction) -> GridFunction:
    """Apply S: at each non-vertex point, the least (f(y) + f(z))/2 + 1 over grid splits."""
    g = f.grid
    den = 2 * f.den
    v = f.nums
    if v.dtype == object or not _fits(np.array([2 * int(np.abs(v).max(initial=0)) + den], dtype=object)):
        v = v.astype(object)
    cand = v[g.pair_y] + v[g.pair_z] + den
    new = v * 2
    if len(cand):
        best = np.minimum.reduceat(cand, g.pair_starts)
        new = new.copy()
        new[g.pair_targets] = best
    # non-vertex points with no split keep nothing better than +inf; grids of depth >= 1 always have one
    new[g.vertex_index] = [int(p * den) for p in f.phi]
    return GridFunction(g, new, den, f.phi)


def _max_iters_default(grid: DyadicGrid, phi) -> int:
    spread = max(phi) - min(phi)
    return int(len(grid) * (float(spread) + float(kappa(grid.dim)) + 2)) + 1


def _residual(f: GridFunction, g: GridFunction) -> Fraction:
    a, b, den = _common(f, g)
    diff = np.abs((a.astype(object) - b.astype(object)))
    return Fraction(int(diff.max(initial=0)), den)


class NotConverged(RuntimeError):
    def __init__(self, last: GridFunction, residual: Fraction):
        super().__init__(f"no fixed point after {last.iterations} iterations; residual {residual}")
        self.last = last
        self.residual = residual


def upper_seed(grid: DyadicGrid, phi=None) -> GridFunction:
    """kappa(face dimension) plus the affine interpolation of phi."""
    phi = _phi_tuple(grid, phi)
    aff = affine_function(grid, phi)
    kap = [kappa(int(k)) for k in grid.face_dim]
    kden = _lcm(k.denominator for k in kap)
    den = _lcm([aff.den, kden])
    nums = aff.rescaled(den).astype(object) + np.array([int(k * den) for k in kap], dtype=object)
    return GridFunction(grid, nums, den, phi)


def _iterate(grid, f, update, max_iters, strict, direction):
    if max_iters is None:
        max_iters = _max_iters_default(grid, f.phi)
    history = []
    for it in range(1, max_iters + 1):
        g = update(f)
        a, b, _ = _common(f, g)
        step_ok = bool(np.all(b <= a) if direction < 0 else np.all(b >= a))
        history.append(step_ok)
        if g.same_values(f):
            f.iterations, f.converged, f.residual, f.history = it - 1, True, Fraction(0), history
            return f
        f = g
    last = update(f)
    res = _residual(f, last)
    f.iterations, f.converged, f.residual, f.history = max_iters, res == 0, res, history
    if strict and res:
        raise NotConverged(f, res)
    return f


def solve_upper(grid: DyadicGrid, phi=None, max_iters: int | None = None, strict: bool = False) -> GridFunction:
    """Iterate f <- S f from kappa(face dimension) + affine(phi).

    The seed dominates the extremal function, so the iterates are pointwise
    upper bounds that decrease to a fixed point.  ``history`` records, per
    step, whether the step was pointwise non-increasing.
    """
    f = upper_seed(grid, phi)
    return _iterate(grid, f, s_step, max_iters, strict, -1)


def solve_lower(grid: DyadicGrid, phi=None, seed: str = "affine", max_iters: int | None = None,
                strict: bool = False) -> GridFunction:
    """Iterate h <- max(h, S h) from an approximately convex seed.

    ``seed`` is ``affine`` (interpolation of phi) or ``zero`` (only with phi = 0).
    """
    phi = _phi_tuple(grid, phi)
    if seed == "zero":
        if any(phi):
            raise ValueError("the zero seed needs phi = 0")
        h = GridFunction(grid, np.zeros(len(grid), dtype=np.int64), 1, phi)
    elif seed == "affine":
        h = affine_function(grid, phi)
    else:
        raise ValueError(f"unknown seed {seed!r}")

    def update(h):
        s = s_step(h)
        a, b, den = _common(h, s)
        return GridFunction(grid, np.maximum(a, b), den, phi)

    return _iterate(grid, h, update, max_iters, strict, +1)


def midpoint_violations(f: GridFunction, slack=1) -> int:
    """Number of grid splits with f(x) > (f(y) + f(z))/2 + slack."""
    g = f.grid
    v = f.nums.astype(object)
    s2 = Fraction(slack) * 2 * f.den
    lhs = 2 * v[g.pair_x]
    rhs = v[g.pair_y] + v[g.pair_z] + s2
    return int(np.count_nonzero(lhs > rhs))


def write_csv(f: GridFunction, stream=None) -> str:
    """Rows of exact coordinates then the exact value, with a header."""
    out = stream or io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow([f"x{k}" for k in range(f.grid.dim + 1)] + ["value"])
    for i, pt in enumerate(f.grid.points):
        coords = [str(Fraction(int(c), f.grid.scale)) for c in pt]
        w.writerow(coords + [str(f.value(i))])
    return out.getvalue() if stream is None else ""


def read_csv(text: str, phi=None) -> GridFunction:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], [r for r in rows[1:] if r]
    dim = len(header) - 2
    coords = [[Fraction(c) for c in r[:-1]] for r in body]
    den = _lcm(c.denominator for row in coords for c in row)
    depth = den.bit_length() - 1
    if den != 1 << depth:
        raise ValueError("grid coordinates must be dyadic")
    grid = DyadicGrid(dim, depth)
    if len(body) != len(grid):
        raise ValueError(f"expected {len(grid)} rows for a full grid, got {len(body)}")
    vals = [Fraction(0)] * len(grid)
    for row, r in zip(coords, body):
        vals[grid.index([int(c * den) for c in row])] = Fraction(r[-1])
    return grid_function(grid, vals, phi)


@dataclass(frozen=True)
class PolytopeSpec:
    vertices: tuple[tuple[Fraction, ...], ...]
    phi: tuple[Fraction, ...]

    def __post_init__(self):
        verts = tuple(tuple(Fraction(c) for c in v) for v in self.vertices)
        if not verts:
            raise ValueError("a polytope needs at least one vertex")
        if len({len(v) for v in verts}) != 1:
            raise ValueError("vertices must share one dimension")
        phi = tuple(Fraction(p) for p in self.phi) if self.phi is not None else (Fraction(0),) * len(verts)
        if len(phi) != len(verts):
            raise ValueError("one phi value per vertex is required")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "phi", phi)


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    """Gauss-Jordan on a square system; None if singular."""
    n = len(a)
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return None
        m[c], m[piv] = m[piv], m[c]
        p = m[c][c]
        m[c] = [v / p for v in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[c])]
    return [m[r][n] for r in range(n)]


def _rank_rows(rows: list[list[Fraction]]) -> list[int]:
    """Indices of a maximal independent subset of rows."""
    basis: list[list[Fraction]] = []
    keep = []
    for i, r in enumerate(rows):
        v = r[:]
        for bvec, col in basis:
            if v[col] != 0:
                f = v[col] / bvec[col]
                v = [a - f * b for a, b in zip(v, bvec)]
        col = next((j for j, a in enumerate(v) if a != 0), None)
        if col is not None:
            basis.append((v, col))
            keep.append(i)
    return keep


def preimage_vertices(spec: PolytopeSpec, x: Sequence) -> list[tuple[Fraction, ...]]:
    """Vertices of {alpha in the simplex : sum alpha_k v_k = x}, exactly."""
    x = [Fraction(c) for c in x]
    m = len(spec.vertices)
    rows = [[spec.vertices[k][i] for k in range(m)] for i in range(len(x))] + [[Fraction(1)] * m]
    rhs = x + [Fraction(1)]
    keep = _rank_rows([r + [b] for r, b in zip(rows, rhs)])
    coef_keep = _rank_rows(rows)
    if len(keep) != len(coef_keep):
        return []
    rows = [rows[i] for i in coef_keep]
    rhs = [rhs[i] for i in coef_keep]
    r = len(rows)
    found = set()
    for cols in itertools.combinations(range(m), r):
        sol = _solve_exact([[row[c] for c in cols] for row in rows], rhs)
        if sol is None or any(s < 0 for s in sol):
            continue
        alpha = [Fraction(0)] * m
        for c, s in zip(cols, sol):
            alpha[c] = s
        found.add(tuple(alpha))
    return sorted(found)


def polytope_extremal(spec: PolytopeSpec, x: Sequence, depth: int = 6, terms: int = 40) -> Enclosure:
    """Enclose the least E(alpha) + phi . alpha over barycentric preimages alpha of x.

    The lower end uses the entropy lower bound for E, whose sum with a
    linear term is concave and so is minimised at a vertex of the preimage
    polytope.  The upper end is the best of E at those vertices and E at
    dyadic grid points of depth ``depth`` lying in the preimage.
    """
    x = [Fraction(c) for c in x]
    if len(x) != len(spec.vertices[0]):
        raise ValueError("query point has the wrong dimension")
    verts = preimage_vertices(spec, x)
    if not verts:
        raise ValueError(f"{[str(c) for c in x]} is outside the hull of the vertices")
    phi = spec.phi

    def lin(a):
        return sum((p * c for p, c in zip(phi, a)), Fraction(0))

    lo = min(entropy_enclose(a).lo + lin(a) for a in verts)
    hi = min(e_point(a, mode="enclose", terms=terms).hi + lin(a) for a in verts)
    m = len(spec.vertices) - 1
    if comb((1 << depth) + m, m) <= 2_000_000:
        grid_pts = _compositions(1 << depth, m + 1)
        den = _lcm([c.denominator for v in spec.vertices for c in v] + [c.denominator for c in x])
        vmat = np.array([[int(c * den) for c in v] for v in spec.vertices], dtype=object)
        target = np.array([int(c * den) << depth for c in x], dtype=object)
        img = grid_pts.astype(object) @ vmat
        hit = np.flatnonzero(np.all(img == target, axis=1))
        if len(hit):
            from .extremal import e_numerators

            pts = grid_pts[hit]
            evals = e_numerators(pts, depth)
            for p, ev in zip(pts, evals):
                a = [Fraction(int(c), 1 << depth) for c in p]
                hi = min(hi, Fraction(int(ev), 1 << depth) + lin(a))
    return Enclosure(lo, hi)
