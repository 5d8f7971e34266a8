"""Midpoint defect, distances, hull membership and E-weighted distance certificates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from ..extremal import Enclosure, e_point
from .norms import Norm, norm_eval

HULL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("a point set must be non-empty")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if self.labels is not None and len(self.labels) != len(pts):
            raise ValueError("one label per point is required")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_json(cls, data) -> PointSet:
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        pts = np.asarray(data["points"], dtype=float)
        if "dim" in data and pts.shape[1] != int(data["dim"]):
            raise ValueError(f"points have dimension {pts.shape[1]}, header says {data['dim']}")
        labels = data.get("labels")
        return cls(pts, tuple(labels) if labels is not None else None)

    def to_json(self) -> dict:
        out = {"dim": self.dim, "points": self.points.tolist()}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out


def _pts(A) -> np.ndarray:
    return A.points if isinstance(A, PointSet) else np.atleast_2d(np.asarray(A, dtype=float))


def dist_to_set(z, A, norm: Norm) -> tuple[float, int]:
    pts = _pts(A)
    d = norm_eval(norm, pts - np.asarray(z, dtype=float))
    i = int(np.argmin(d))
    return float(d[i]), i


def dists_to_set(Z: np.ndarray, A, norm: Norm, chunk: int = 1 << 20) -> tuple[np.ndarray, np.ndarray]:
    """Distance from each row of ``Z`` to the set, with nearest indices."""
    pts = _pts(A)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    best = np.full(len(Z), np.inf)
    arg = np.zeros(len(Z), dtype=np.int64)
    rows = max(1, chunk // max(1, len(pts)))
    for s in range(0, len(Z), rows):
        block = Z[s:s + rows]
        diff = (pts[None, :, :] - block[:, None, :]).reshape(-1, pts.shape[1])
        d = norm_eval(norm, diff).reshape(len(block), len(pts))
        arg[s:s + rows] = d.argmin(axis=1)
        best[s:s + rows] = d.min(axis=1)
    return best, arg


def midpoint_defect(A, norm: Norm) -> tuple[float, tuple[int, int], np.ndarray]:
    """max over pairs b, c of min over a of ||a - (b + c)/2||.

    Returns the defect, the worst pair of indices and its midpoint.
    """
    pts = _pts(A)
    n = len(pts)
    if n == 1:
        return 0.0, (0, 0), pts[0].copy()
    i, j = np.triu_indices(n, k=1)
    mids = (pts[i] + pts[j]) / 2
    d, _ = dists_to_set(mids, pts, norm)
    k = int(np.argmax(d))
    return float(d[k]), (int(i[k]), int(j[k])), mids[k]


class OutsideHull(ValueError):
    pass


def _reduce_support(P: np.ndarray, w: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pivot out points until at most dim + 1 carry weight, keeping sum w_i p_i and sum w_i."""
    dim = P.shape[1]
    while len(idx) > dim + 1:
        M = np.vstack([P[idx].T, np.ones(len(idx))])
        v = np.linalg.svd(M)[2][-1]
        if not np.any(v > 0):
            v = -v
        pos = v > 1e-15
        t = np.min(w[pos] / v[pos])
        w = w - t * v
        keep = w > 1e-15
        keep[np.argmin(np.where(pos, w, np.inf))] = False
        idx, w = idx[keep], w[keep]
    return idx, w


def caratheodory_weights(z, A, tol: float = HULL_TOL) -> tuple[np.ndarray, np.ndarray]:
    """At most dim + 1 indices and convex weights reproducing ``z``.

    Membership is decided by a linear program that minimises the l1
    residual of the reconstruction; a residual above ``tol`` (relative to
    the scale of the set) raises OutsideHull.
    """
    P = _pts(A)
    z = np.asarray(z, dtype=float)
    n, dim = P.shape
    scale = max(1.0, float(np.abs(P).max()), float(np.abs(z).max()))
    # variables: weights (n), positive and negative residuals (dim each)
    c = np.concatenate([np.zeros(n), np.ones(2 * dim)])
    A_eq = np.zeros((dim + 1, n + 2 * dim))
    A_eq[:dim, :n] = P.T
    A_eq[:dim, n:n + dim] = np.eye(dim)
    A_eq[:dim, n + dim:] = -np.eye(dim)
    A_eq[dim, :n] = 1.0
    b_eq = np.concatenate([z, [1.0]])
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"hull-membership LP failed: {res.message}")
    if res.fun > tol * scale:
        raise OutsideHull(f"point is outside the hull (l1 residual {res.fun:.3g})")
    w = res.x[:n]
    idx = np.flatnonzero(w > 1e-14)
    idx, wts = _reduce_support(P, w[idx], idx)
    # polish on the final support
    M = np.vstack([P[idx].T, np.ones(len(idx))])
    sol, *_ = np.linalg.lstsq(M, np.concatenate([z, [1.0]]), rcond=None)
    if np.all(sol >= 0):
        wts = sol
    wts = np.clip(wts, 0, None)
    wts = wts / wts.sum()
    order = np.argsort(idx)
    return idx[order], wts[order]


def in_hull(z, A, tol: float = HULL_TOL) -> bool:
    try:
        caratheodory_weights(z, A, tol)
    except OutsideHull:
        return False
    return True


def exact_weights(w: Sequence[float], max_den: int = 1 << 20) -> tuple[Fraction, ...]:
    """Exact convex weights close to ``w``.

    Small-denominator rationals are used when they reproduce ``w`` to
    rounding; otherwise every weight is the float itself (a dyadic rational)
    except the largest, which absorbs the exact remainder.
    """
    w = [max(0.0, float(x)) for x in w]
    s = sum(w)
    w = [x / s for x in w]
    guess = [Fraction(x).limit_denominator(max_den) for x in w]
    if sum(guess) == 1 and all(abs(float(g) - x) <= 4e-16 * max(1, x) for g, x in zip(guess, w)):
        return tuple(guess)
    big = max(range(len(w)), key=lambda i: w[i])
    out = [Fraction(x) for x in w]
    out[big] = 1 - (sum(out) - out[big])
    return tuple(out)


@dataclass
class Certificate:
    z: np.ndarray
    indices: np.ndarray
    alpha: tuple[Fraction, ...]
    e_alpha: Enclosure
    delta: float
    bound: float
    dist: float
    nearest: int
    slack: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "z": self.z.tolist(),
            "indices": self.indices.tolist(),
            "alpha": [str(a) for a in self.alpha],
            "alpha_decimal": [float(a) for a in self.alpha],
            "e_alpha": [str(self.e_alpha.lo), str(self.e_alpha.hi)],
            "e_alpha_decimal": [float(self.e_alpha.lo), float(self.e_alpha.hi)],
            "delta": self.delta,
            "bound": self.bound,
            "dist": self.dist,
            "nearest": self.nearest,
            "reconstruction_slack": self.slack,
            "pass": self.passed,
        }


def certify_hull_point(z, A, norm: Norm, delta: float | None = None, tol: float = 1e-9,
                       terms: int = 60) -> Certificate:
    """Check dist(z, A) <= E(alpha) * delta for Caratheodory weights alpha of z.

    The weights are made exact before E is evaluated.  The reconstruction
    error ||z - sum alpha_i a_i|| is added to the bound, so the comparison
    is sound for the exact weights actually used.
    """
    P = _pts(A)
    z = np.asarray(z, dtype=float)
    if delta is None:
        delta = midpoint_defect(P, norm)[0]
    idx, w = caratheodory_weights(z, P)
    alpha = exact_weights(w)
    enc = e_point(alpha, mode="enclose", terms=terms)
    b = np.array([float(a) for a in alpha]) @ P[idx]
    slack = float(norm_eval(norm, z - b))
    d, near = dist_to_set(z, P, norm)
    bound = float(enc.hi) * delta
    passed = d <= bound + slack + tol * max(1.0, bound)
    return Certificate(z, idx, alpha, enc, float(delta), bound, d, near, slack, bool(passed))


@dataclass
class DefectReport:
    delta: float
    worst_pair: tuple[int, int]
    worst_midpoint: np.ndarray
    samples: list = field(default_factory=list)
    hull_estimate: float | None = None
    hull_argmax: np.ndarray | None = None

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.samples)

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "worst_pair": list(self.worst_pair),
            "worst_midpoint": self.worst_midpoint.tolist(),
            "hull_estimate": self.hull_estimate,
            "hull_argmax": None if self.hull_argmax is None else self.hull_argmax.tolist(),
            "certificates": [c.to_json() for c in self.samples],
            "all_pass": self.all_pass,
        }


def _hull_filter(P: np.ndarray):
    """A function mapping candidate rows to a membership mask for conv(P)."""
    scale = max(1.0, float(np.abs(P).max()))
    c = P.mean(axis=0)
    _, sv, vt = np.linalg.svd(P - c)
    rank = int(np.sum(sv > 1e-12 * scale * len(P)))
    basis = vt[:rank]
    Q = (P - c) @ basis.T

    def off_plane(X):
        R = (X - c) - ((X - c) @ basis.T) @ basis
        return np.linalg.norm(R, axis=1) <= 1e-12 * scale

    if rank == 0:
        return off_plane
    if rank == 1:
        lo, hi = Q.min(), Q.max()
        return lambda X: off_plane(X) & (((X - c) @ basis.T)[:, 0] >= lo - 1e-12 * scale) & \
            (((X - c) @ basis.T)[:, 0] <= hi + 1e-12 * scale)
    eq = ConvexHull(Q).equations
    return lambda X: off_plane(X) & np.all(((X - c) @ basis.T) @ eq[:, :-1].T + eq[:, -1] <= 1e-12 * scale,
                                           axis=1)


def hull_samples_grid(P: np.ndarray, resolution: float, max_points: int = 60_000_000):
    """Yield chunks of lattice points of spacing ``resolution`` lying in conv(P)."""
    lo, hi = P.min(axis=0), P.max(axis=0)
    counts = np.floor((hi - lo) / resolution).astype(int) + 1
    total = int(np.prod(counts.astype(float)))
    if total > max_points:
        raise ValueError(f"grid of {total} points exceeds the limit {max_points}; coarsen the resolution")
    inside = _hull_filter(P)
    axes = [lo[k] + resolution * np.arange(counts[k]) for k in range(len(lo))]
    # add the far end of each axis so the box corners are covered exactly
    axes = [np.unique(np.append(a, h)) for a, h in zip(axes, hi)]
    first, rest = axes[0], axes[1:]
    if rest:
        tail = np.stack(np.meshgrid(*rest, indexing="ij"), axis=-1).reshape(-1, len(rest))
    else:
        tail = np.zeros((1, 0))
    step = max(1, 2_000_000 // len(tail))
    for s in range(0, len(first), step):
        head = first[s:s + step]
        X = np.column_stack([np.repeat(head, len(tail)), np.tile(tail, (len(head), 1))])
        X = X[inside(X)]
        if len(X):
            yield X


def hull_samples_random(P: np.ndarray, count: int, seed: int):
    """Random convex combinations: Dirichlet weights on random (dim + 1)-subsets and on all points."""
    rng = np.random.default_rng(seed)
    n, dim = P.shape
    k = min(n, dim + 1)
    out = []
    for _ in range(count):
        if rng.random() < 0.5:
            idx = rng.choice(n, size=k, replace=False)
        else:
            idx = np.arange(n)
        w = rng.dirichlet(np.full(len(idx), 0.5 if rng.random() < 0.5 else 1.0))
        out.append(w @ P[idx])
    yield np.array(out)


def hull_defect_estimate(A, norm: Norm, sampler: str = "grid", resolution: float | None = None,
                         count: int = 10_000, seed: int | None = None) -> tuple[float, np.ndarray]:
    """Largest distance to A among sampled hull points; a lower bound for the hull defect."""
    P = _pts(A)
    if len(P) < 2:
        raise ValueError("need at least two points")
    if sampler == "grid":
        if resolution is None:
            resolution = float((P.max(axis=0) - P.min(axis=0)).max()) / 256
        chunks = hull_samples_grid(P, resolution)
    elif sampler == "random":
        if seed is None:
            raise ValueError("the random sampler needs a seed")
        chunks = hull_samples_random(P, count, seed)
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    best, arg = -1.0, None
    for X in chunks:
        d, _ = dists_to_set(X, P, norm)
        k = int(np.argmax(d))
        if d[k] > best:
            best, arg = float(d[k]), X[k].copy()
    return best, arg


def defect_report(A, norm: Norm, samples: np.ndarray | None = None) -> DefectReport:
    P = _pts(A)
    delta, pair, mid = midpoint_defect(P, norm)
    rep = DefectReport(delta, pair, mid)
    if samples is not None:
        rep.samples = [certify_hull_point(z, P, norm, delta=delta) for z in samples]
    return rep
