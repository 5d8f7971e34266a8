"""Convex minorants of sampled approximately convex functions and the kappa(n) * eps gap."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from .extremal import kappa

TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SampledFunction:
    points: np.ndarray
    values: np.ndarray
    epsilon: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if len(pts) == 0 or len(pts) != len(vals):
            raise ValueError("need one value per sample point and at least one sample")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.values)


def midpoint_violations(s: SampledFunction, tol: float = TOL) -> list[tuple[int, int, int]]:
    """Sample triples (i, j, k) with x_k the midpoint of x_i, x_j and f_k > (f_i + f_j)/2 + eps."""
    pts = s.points
    scale = max(1.0, float(np.abs(pts).max()))
    key = {tuple(np.round(p / scale, 12)): k for k, p in enumerate(pts)}
    bad = []
    n = len(pts)
    for i in range(n):
        mids = (pts[i] + pts[i + 1:]) / 2
        for off, m in enumerate(mids):
            k = key.get(tuple(np.round(m / scale, 12)))
            if k is None:
                continue
            j = i + 1 + off
            if s.values[k] > (s.values[i] + s.values[j]) / 2 + s.epsilon + tol:
                bad.append((i, j, k))
    return bad


def convex_minorant(s: SampledFunction, x) -> float:
    """min sum a_i f_i over convex weights a with sum a_i x_i = x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P, f = s.points, s.values
    n, dim = P.shape
    if x.shape != (dim,):
        raise ValueError("query point has the wrong dimension")
    if n == 1:
        if np.allclose(P[0], x, atol=TOL):
            return float(f[0])
        raise ValueError("query point is outside the hull of the samples")
    A_eq = np.vstack([P.T, np.ones(n)])
    b_eq = np.concatenate([x, [1.0]])
    res = linprog(f, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        raise ValueError("query point is outside the hull of the samples")
    if res.status != 0:
        raise RuntimeError(f"minorant LP failed: {res.message}")
    # re-solve on the optimal support to remove LP tolerance noise
    idx = np.flatnonzero(res.x > 1e-12)
    M = A_eq[:, idx]
    sol, *_ = np.linalg.lstsq(M, b_eq, rcond=None)
    if np.all(sol >= -1e-15) and np.allclose(M @ sol, b_eq, atol=1e-12, rtol=0):
        return float(np.clip(sol, 0, None) @ f[idx])
    return float(res.fun)


def minorant_at_samples(s: SampledFunction) -> np.ndarray:
    return np.array([convex_minorant(s, p) for p in s.points])


@dataclass
class StabilityReport:
    sup_gap: float
    kappa_bound: float
    offset: float
    min_gap: float
    passed: bool
    minorant: np.ndarray

    def to_json(self) -> dict:
        return {
            "sup_gap": self.sup_gap,
            "kappa_bound": self.kappa_bound,
            "g0_offset": self.offset,
            "min_gap": self.min_gap,
            "two_sided": {"g<=f": self.min_gap >= -TOL, "f<=g+kappa*eps": self.sup_gap <= self.kappa_bound + TOL},
            "pass": self.passed,
        }


def stability_report(s: SampledFunction, tol: float = TOL) -> StabilityReport:
    """Gap between the samples and their convex minorant g, checked against kappa(n) * eps.

    The symmetric form uses g_0 = g + kappa(n) eps / 2, so |f - g_0| <= kappa(n) eps / 2.
    """
    g = minorant_at_samples(s)
    gap = s.values - g
    bound = float(kappa(s.dim)) * s.epsilon
    sup_gap = float(gap.max())
    min_gap = float(gap.min())
    passed = sup_gap <= bound + tol and min_gap >= -tol
    return StabilityReport(sup_gap, bound, bound / 2, min_gap, bool(passed), g)


def read_samples(text_or_path, epsilon: float) -> SampledFunction:
    """CSV rows ``x_1, ..., x_n, value``; a non-numeric first row is taken as a header."""
    src = text_or_path
    is_file = isinstance(src, Path) or ("\n" not in src and Path(src).is_file())
    text = Path(src).read_text() if is_file else src
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    data = np.array([[float(c) for c in r] for r in rows])
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("each sample row needs at least one coordinate and a value")
    return SampledFunction(data[:, :-1], data[:, -1], epsilon)


def e_samples(dim: int, depth: int, epsilon: float) -> SampledFunction:
    """eps * E on the dyadic grid of the dim-simplex, in coordinates x_1 .. x_dim."""
    from .extremal import e_numerators
    from .solver import _compositions

    scale = 1 << depth
    pts = _compositions(scale, dim + 1)
    vals = e_numerators(pts, depth) / float(scale)
    return SampledFunction(pts[:, 1:] / float(scale), epsilon * vals, epsilon)
