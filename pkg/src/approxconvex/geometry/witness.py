"""Finite samplings of the epigraph-type sets that force dist(b, A) close to E(alpha) * defect.

Over a scaled base simplex V_M = conv(M a_0, ..., M a_{n-1}) lying in a
hyperplane, every dyadic column point x gets the vertical segment from
E(x) up to kappa(n-1) + 1 in a direction u.  The point b = sum alpha_k M a_k
is in the hull (the columns over the vertices start at height 0) but far
from the set when E(alpha) is large.

The midpoint defect of the finite sample cannot be brute-forced at useful
sizes, so it is bracketed:

* Midpoints lying over a grid column are within 1 of it, because E is
  approximately convex and so the midpoint height is at least E(q) - 1.
* Other midpoints lie over a point q of the half-step grid.  Their height is
  at least E(q) - 1 for the same reason, and a neighbouring column is
  within reach; the best neighbour gives an upper bound for that q.
* One explicit pair gives a lower bound.

The ratio reported is dist(b, sample) divided by the upper bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..extremal import e_numerators, e_point, kappa
from ..solver import _compositions
from .hull import dists_to_set
from .norms import Norm, norm_eval


class WitnessError(ValueError):
    pass


def vertical_direction(norm: Norm, n: int) -> np.ndarray:
    """A unit vector u with lambda(u) = 1 for a norm-one functional lambda vanishing on x_n = 0.

    u is a point of the unit ball with the largest last coordinate.
    """
    if norm.kind == "polyhedral":
        g = norm.generators
        if g.shape[1] != n:
            raise WitnessError("norm dimension does not match n")
        u = g[np.argmax(g[:, -1])].copy()
    else:
        u = np.zeros(n)
        u[-1] = 1.0
    return u / norm_eval(norm, u)


def base_vertices(n: int) -> np.ndarray:
    """a_0 = 0 and a_k = e_k for 1 <= k < n, inside the hyperplane x_n = 0."""
    a = np.zeros((n, n))
    for k in range(1, n):
        a[k, k - 1] = 1.0
    return a


@dataclass
class WitnessSet:
    norm: Norm
    n: int
    alpha: tuple[Fraction, ...]
    e_alpha: float
    M: float
    depth: int
    spacing: float
    eps: float
    u: np.ndarray
    b: np.ndarray
    columns: np.ndarray          # integer numerators over 2^depth, one row per column
    column_floor: np.ndarray     # E at each column
    column_levels: np.ndarray    # number of sampled heights per column
    top: float
    measured_dist: float
    nearest: np.ndarray
    delta_upper: float
    delta_lower: float
    delta_lower_pair: tuple
    far_margin: float
    stats: dict = field(default_factory=dict)

    @property
    def measured_delta(self) -> float:
        return self.delta_upper

    @property
    def ratio(self) -> float:
        return self.measured_dist / self.delta_upper

    @property
    def ratio_upper(self) -> float:
        return self.measured_dist / self.delta_lower

    @property
    def target(self) -> float:
        return self.e_alpha - self.eps

    @property
    def meets_target(self) -> bool:
        return self.ratio >= self.target

    @property
    def m_condition(self) -> bool:
        """The sufficient scale condition of the continuum argument; informational only."""
        return self.far_margin > 0

    def __len__(self) -> int:
        return int(self.column_levels.sum())

    def base_points(self) -> np.ndarray:
        a = base_vertices(self.n)
        return self.M * (self.columns / float(1 << self.depth)) @ a

    def points(self) -> np.ndarray:
        """All sample points, column by column from the floor upwards."""
        base = self.base_points()
        reps = self.column_levels
        j = np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)
        floor = np.repeat(self.column_floor, reps)
        step = np.repeat((self.top - self.column_floor) / np.maximum(reps - 1, 1), reps)
        heights = floor + j * step
        return np.repeat(base, reps, axis=0) + heights[:, None] * self.u[None, :]

    def hull_weights(self) -> tuple[np.ndarray, tuple[Fraction, ...]]:
        """Indices of the n vertex-column floors and the weights alpha reproducing b."""
        starts = np.cumsum(self.column_levels) - self.column_levels
        scale = 1 << self.depth
        idx = []
        for k in range(self.n):
            target = np.zeros(self.n, dtype=np.int64)
            target[k] = scale
            col = int(np.flatnonzero(np.all(self.columns == target, axis=1))[0])
            idx.append(int(starts[col]))
        return np.array(idx), self.alpha

    def to_json(self) -> dict:
        return {
            "norm": self.norm.spec(),
            "n": self.n,
            "alpha": [str(a) for a in self.alpha],
            "e_alpha": self.e_alpha,
            "M": self.M,
            "depth": self.depth,
            "vertical_spacing": self.spacing,
            "eps": self.eps,
            "points": len(self),
            "b": self.b.tolist(),
            "measured_dist": self.measured_dist,
            "nearest": self.nearest.tolist(),
            "delta_upper": self.delta_upper,
            "delta_lower": self.delta_lower,
            "ratio": self.ratio,
            "ratio_upper": self.ratio_upper,
            "target": self.target,
            "meets_target": self.meets_target,
            "far_field_margin": self.far_margin,
            "m_condition": self.m_condition,
            "stats": self.stats,
        }


def _column_keys(cols: np.ndarray, base: int) -> np.ndarray:
    key = np.zeros(len(cols), dtype=np.int64)
    for k in range(cols.shape[1] - 1):
        key = key * base + cols[:, k]
    return key


def _odd_bound(norm: Norm, u: np.ndarray, M: float, depth: int, cols: np.ndarray, floor: np.ndarray,
               levels: np.ndarray, top: float, chunk: int = 1 << 21) -> tuple[float, dict]:
    """Upper bound for distances from midpoints lying over half-step points."""
    n = cols.shape[1]
    scale = 1 << depth
    base = scale + 1
    keys = _column_keys(cols, base)
    order = np.argsort(keys)
    sorted_keys = keys[order]
    step = (top - floor) / np.maximum(levels - 1, 1)
    a = base_vertices(n)
    half = _compositions(2 * scale, n)
    odd_mask = (half & 1).astype(bool)
    is_odd = odd_mask.any(axis=1)
    half, odd_mask = half[is_odd], odd_mask[is_odd]
    if not len(half):
        return 0.0, {"odd_points": 0}
    eq_low = np.maximum(e_numerators(half, depth + 1) / float(2 * scale) - 1.0, 0.0)
    patterns = np.packbits(odd_mask, axis=1, bitorder="little").astype(np.int64)
    pat_key = np.zeros(len(half), dtype=np.int64)
    for col in range(patterns.shape[1]):
        pat_key = pat_key | (patterns[:, col] << (8 * col))
    worst = 0.0
    worst_q = None
    for pk in np.unique(pat_key):
        sel = np.flatnonzero(pat_key == pk)
        odd = [k for k in range(n) if (pk >> k) & 1]
        pairs = [(odd[i], odd[i + 1]) for i in range(0, len(odd), 2)]
        for s0 in range(0, len(sel), chunk):
            rows = sel[s0:s0 + chunk]
            q = half[rows]
            best = np.full(len(rows), np.inf)
            for signs in itertools.product((1, -1), repeat=len(pairs)):
                shift = np.zeros(n, dtype=np.int64)
                for (i, j), sg in zip(pairs, signs):
                    shift[i] += sg
                    shift[j] -= sg
                c2 = q + shift
                ok = np.all(c2 >= 0, axis=1)
                c = c2 // 2
                ci = np.zeros(len(rows), dtype=np.int64)
                ci[ok] = order[np.searchsorted(sorted_keys, _column_keys(c[ok], base))]
                # offset from the half-step point to the column, in the base hyperplane
                w = M * (shift / float(2 * scale)) @ a
                wn = float(norm_eval(norm, w))
                t = np.maximum(floor[ci] - eq_low[rows], 0.0)
                slanted = norm_eval(norm, w[None, :] + t[:, None] * u[None, :])
                cand = np.maximum(wn + step[ci] / 2, slanted)
                cand[~ok] = np.inf
                best = np.minimum(best, cand)
            k = int(np.argmax(best))
            if best[k] > worst:
                worst, worst_q = float(best[k]), q[k]
    return worst, {"odd_points": int(len(half)),
                   "worst_odd_point": None if worst_q is None else [int(v) for v in worst_q]}


def witness_set(norm: Norm, n: int, alpha: Sequence, eps: float = 0.05, M: float = 64.0, depth: int = 8,
                spacing: float = 0.5, strict: bool = False) -> WitnessSet:
    """Build and measure a sampled witness set over the (n-1)-simplex scaled by M.

    ``alpha`` is a point of the (n-1)-simplex with n rational coordinates.
    With ``strict`` a WitnessError is raised when dist(b, sample) or the
    measured ratio falls below E(alpha) - eps.  The far-field margin of the
    continuum argument is reported but not enforced, since the distance is
    measured over the whole sample.
    """
    if n < 2:
        raise WitnessError("n must be at least 2")
    if not 0 < spacing <= 0.5:
        raise WitnessError("vertical spacing must lie in (0, 1/2]")
    if norm.dim is not None and norm.dim != n:
        raise WitnessError("norm dimension does not match n")
    alpha = tuple(Fraction(a) for a in alpha)
    if len(alpha) != n or sum(alpha) != 1 or min(alpha) < 0:
        raise WitnessError(f"alpha must be {n} non-negative rationals summing to 1")
    e_alpha = float(e_point(alpha, mode="enclose", terms=60).lo)
    u = vertical_direction(norm, n)
    a = base_vertices(n)
    scale = 1 << depth
    top = float(kappa(n - 1)) + 1.0
    cols = _compositions(scale, n)
    floor = e_numerators(cols, depth) / float(scale)
    levels = np.ceil((top - floor) / spacing - 1e-12).astype(np.int64) + 1
    b = M * np.array([float(x) for x in alpha]) @ a
    ws = WitnessSet(norm=norm, n=n, alpha=alpha, e_alpha=e_alpha, M=float(M), depth=depth, spacing=spacing,
                    eps=eps, u=u, b=b, columns=cols, column_floor=floor, column_levels=levels, top=top,
                    measured_dist=0.0, nearest=b, delta_upper=0.0, delta_lower=0.0, delta_lower_pair=(),
                    far_margin=0.0)
    pts = ws.points()
    d, arg = dists_to_set(b[None, :], pts, norm)
    ws.measured_dist, ws.nearest = float(d[0]), pts[int(arg[0])]
    odd, stats = _odd_bound(norm, u, float(M), depth, cols, floor, levels, top)
    # midpoints over grid columns: height deficit at most 1, vertical gaps at most spacing
    ws.delta_upper = max(1.0, spacing / 2, odd)
    mid = M * (a[0] + a[1]) / 2
    dl, _ = dists_to_set(mid[None, :], pts, norm)
    ws.delta_lower = float(dl[0])
    ws.delta_lower_pair = (mid.tolist(),)
    low = floor < e_alpha - eps
    base = ws.base_points()
    far = norm_eval(norm, base[low] - b[None, :]) if np.any(low) else np.array([np.inf])
    ws.far_margin = float(np.min(far)) - (2 * float(kappa(n - 1)) + 1)
    ws.stats = dict(stats, columns=int(len(cols)), odd_bound=odd)
    if strict:
        if ws.measured_dist < ws.target:
            raise WitnessError(f"scale or depth too small: dist(b, sample) = {ws.measured_dist:.6f} "
                               f"< E(alpha) - eps = {ws.target:.6f}")
        if not ws.meets_target:
            raise WitnessError(f"ratio {ws.ratio:.6f} < E(alpha) - eps = {ws.target:.6f}")
    return ws


def brute_force_defect(ws: WitnessSet, norm: Norm | None = None) -> float:
    """Exact midpoint defect of the sample by enumerating all pairs (small samples only)."""
    from .hull import midpoint_defect

    pts = ws.points()
    if len(pts) > 3000:
        raise WitnessError("sample too large for brute force")
    return midpoint_defect(pts, norm or ws.norm)[0]


def delta1_near_supremum(depth: int) -> tuple[Fraction, Fraction]:
    """(t, 1 - t) with t = 0.0101...01 in binary, the dyadic truncation of 1/3; E = 2 - 2^(1-depth)."""
    if depth % 2:
        depth += 1
    t = Fraction(sum(1 << (depth - i) for i in range(2, depth + 1, 2)), 1 << depth)
    return (t, 1 - t)
