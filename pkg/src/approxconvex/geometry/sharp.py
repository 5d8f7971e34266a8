"""Euclidean regular simplices, sphere configurations and the symmetric-hexagon sum test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .hull import PointSet, caratheodory_weights


def regular_simplex(n: int) -> PointSet:
    """n + 1 unit vectors in R^n with all pairwise distances equal."""
    if n < 1:
        raise ValueError("n must be at least 1")
    # centred standard basis of R^(n+1), written in an orthonormal basis of the sum-zero hyperplane
    e = np.eye(n + 1) - 1.0 / (n + 1)
    q, _ = np.linalg.qr(e[:, :n])
    pts = e @ q
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return PointSet(pts)


def regular_edge(n: int) -> float:
    return math.sqrt(2 * (n + 1) / n)


def regular_midpoint_norm(n: int) -> float:
    return math.sqrt((n - 1) / (2 * n))


def maxside(config, tol: float = 1e-9) -> float:
    pts = config.points if isinstance(config, PointSet) else np.asarray(config, dtype=float)
    r = np.linalg.norm(pts, axis=1)
    if np.any(np.abs(r - 1) > tol):
        raise ValueError("all points must lie on the unit sphere")
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    return float(d.max())


def origin_interior(pts: np.ndarray, margin: float = 1e-9) -> bool:
    """Whether the origin lies strictly inside conv(pts) (pts must span)."""
    try:
        hull = ConvexHull(pts)
    except Exception:
        return False
    return bool(np.all(hull.equations[:, -1] < -margin))


def random_sphere_config(n: int, rng: np.random.Generator, max_tries: int = 10_000) -> np.ndarray:
    """n + 1 random unit vectors in R^n whose hull contains the origin in its interior."""
    for _ in range(max_tries):
        v = rng.normal(size=(n + 1, n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        if n == 1:
            if v[0, 0] * v[1, 0] < 0:
                return v
            continue
        if origin_interior(v):
            return v
    raise RuntimeError("no admissible configuration found")


def euclid_radius_bound(n: int) -> float:
    """sqrt(2n) (sqrt(2n) + sqrt(n - 1)) / (n + 1)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return math.sqrt(2 * n) * (math.sqrt(2 * n) + math.sqrt(n - 1)) / (n + 1)


@dataclass
class HexagonWitness:
    holds: bool
    label: str | None
    point: np.ndarray | None
    indices: np.ndarray | None
    weights: np.ndarray | None
    labels: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    relabeled: bool = False


def _hexagon(a, b, c) -> tuple[np.ndarray, ConvexHull]:
    V = np.array([a, b, c, -np.asarray(a), -np.asarray(b), -np.asarray(c)], dtype=float)
    if V.shape != (6, 2):
        raise ValueError("hexagon vertices must be points in the plane")
    try:
        hull = ConvexHull(V)
    except Exception as exc:
        raise ValueError("degenerate hexagon") from exc
    if len(hull.vertices) != 6:
        raise ValueError("the six points are not the vertices of a convex hexagon")
    return V, hull


def alternate_labels(a, b, c) -> tuple[tuple[np.ndarray, ...], tuple[int, int, int]]:
    """Signs s with s_a a, s_b b, s_c c at every other vertex of the hexagon, a kept fixed."""
    V, hull = _hexagon(a, b, c)
    pos = {int(v): k for k, v in enumerate(hull.vertices)}
    start = pos[0]
    signs = [1, 0, 0]
    for j in (1, 2):
        # +x sits at an even offset from a exactly when x belongs to the alternating triple
        signs[j] = 1 if (pos[j] - start) % 2 == 0 else -1
    return tuple(s * V[j] for j, s in enumerate(signs)), tuple(signs)


def _sums(V, eq, a, b, c, tol, scale, names):
    for (i, j), p in (((0, 1), a + b), ((1, 2), b + c), ((2, 0), c + a)):
        if np.all(eq[:, :2] @ p + eq[:, 2] <= tol * scale):
            idx, w = caratheodory_weights(p, V, tol=tol)
            return f"{names[i]}+{names[j]}", p, idx, w
    return None


def hexagon_check(a, b, c, tol: float = 1e-9) -> HexagonWitness:
    """Find one of a+b, b+c, c+a inside the hexagon with vertices +-a, +-b, +-c.

    The sum property can fail when a, b, c are consecutive vertices, so if
    none of the given sums lies in the hexagon the signs are changed to put
    a, b, c at alternate vertices, where it always holds.  ``relabeled``
    says whether that happened and the labels are reported as signed names.
    """
    V, hull = _hexagon(a, b, c)
    eq = hull.equations
    scale = max(1.0, float(np.abs(V).max()))
    a, b, c = V[0], V[1], V[2]
    found = _sums(V, eq, a, b, c, tol, scale, ("a", "b", "c"))
    if found:
        return HexagonWitness(True, *found, labels=(a, b, c))
    (x, y, z), signs = alternate_labels(a, b, c)
    names = tuple(("" if s > 0 else "-") + n for s, n in zip(signs, "abc"))
    found = _sums(V, eq, x, y, z, tol, scale, names)
    if found:
        label = found[0].replace("+-", "-")
        return HexagonWitness(True, label, *found[1:], labels=(x, y, z), relabeled=True)
    return HexagonWitness(False, None, None, None, None, labels=(x, y, z), relabeled=True)


def random_symmetric_hexagon(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Three vectors whose +- copies are the vertices of a convex hexagon."""
    while True:
        ang = np.sort(rng.uniform(0, math.pi, size=3))
        rad = rng.uniform(0.2, 2.0, size=3)
        pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        perm = rng.permutation(3)
        a, b, c = pts[perm]
        try:
            _hexagon(a, b, c)
        except ValueError:
            continue
        return a, b, c
