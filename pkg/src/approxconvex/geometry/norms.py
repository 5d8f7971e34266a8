"""Norms on R^n evaluated as pure functions of row vectors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

KINDS = ("euclidean", "lp", "linf", "polyhedral")


@dataclass(frozen=True, eq=False)
class Norm:
    """A norm of one of four kinds.

    ``polyhedral`` norms are given by the vertices of their unit ball, which
    must be symmetric about the origin and span the space.  They are
    evaluated through the facet inequalities of that ball.
    """

    kind: str
    p: float | None = None
    generators: np.ndarray | None = None
    _facets: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "lp":
            if self.p is None or not self.p >= 1:
                raise ValueError("lp norms need p >= 1")
        if self.kind == "polyhedral":
            g = np.asarray(self.generators, dtype=float)
            if g.ndim != 2 or len(g) < 2:
                raise ValueError("polyhedral norms need a 2-d array of generators")
            object.__setattr__(self, "generators", g)
            object.__setattr__(self, "_facets", _facet_functionals(g))

    @property
    def dim(self) -> int | None:
        return None if self.generators is None else self.generators.shape[1]

    def __call__(self, v) -> np.ndarray | float:
        return norm_eval(self, v)

    def spec(self) -> str:
        if self.kind == "lp":
            return f"lp:{self.p:g}"
        if self.kind == "polyhedral":
            return "poly"
        return self.kind


def _facet_functionals(g: np.ndarray) -> np.ndarray:
    """Rows f with ||v|| = max_f f . v for the gauge of conv(g)."""
    scale = np.abs(g).max()
    for row in g:
        if np.abs(g + row).max(axis=1).min() > 1e-9 * scale:
            raise ValueError("polyhedral generators must be symmetric about the origin")
    n = g.shape[1]
    if np.linalg.matrix_rank(g, tol=1e-9 * scale) < n:
        raise ValueError("polyhedral generators must span the space")
    if n == 1:
        return np.array([[1.0 / np.abs(g).max()], [-1.0 / np.abs(g).max()]])
    hull = ConvexHull(g)
    eq = hull.equations  # a . x + b <= 0 inside, b < 0 since the origin is interior
    return eq[:, :-1] / -eq[:, -1:]


def norm_eval(norm: Norm, v) -> np.ndarray | float:
    """Norm of a vector, or of each row of a 2-d array."""
    a = np.asarray(v, dtype=float)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if norm.kind == "euclidean":
        out = np.sqrt(np.einsum("ij,ij->i", a, a))
    elif norm.kind == "linf":
        out = np.abs(a).max(axis=1)
    elif norm.kind == "lp":
        p = norm.p
        if p == 1:
            out = np.abs(a).sum(axis=1)
        else:
            s = np.abs(a).max(axis=1)
            safe = np.where(s > 0, s, 1.0)
            out = s * ((np.abs(a) / safe[:, None]) ** p).sum(axis=1) ** (1.0 / p)
    else:
        if a.shape[1] != norm.generators.shape[1]:
            raise ValueError("vector dimension does not match the norm")
        out = np.maximum((a @ norm._facets.T).max(axis=1), 0.0)
    return float(out[0]) if single else out


def euclidean() -> Norm:
    return Norm("euclidean")


def ell_p(p: float) -> Norm:
    if p == float("inf"):
        return Norm("linf")
    return Norm("lp", p=float(p))


def ell_inf() -> Norm:
    return Norm("linf")


def polyhedral(generators) -> Norm:
    """Norm whose unit ball is conv of the given points; ``generators`` may list only one of each +-g pair."""
    g = np.asarray(generators, dtype=float)
    full = []
    for row in np.vstack([g, -g]):
        if not any(np.allclose(row, r, rtol=0, atol=1e-12) for r in full):
            full.append(row)
    return Norm("polyhedral", generators=np.array(full))


def parse_norm(spec: str) -> Norm:
    """Parse ``euclidean``, ``l1``, ``l2``, ``linf``, ``lp:<p>`` or ``poly:<json file>``."""
    s = spec.strip().lower()
    if s in ("euclidean", "l2", "ell2"):
        return euclidean()
    if s in ("l1", "ell1"):
        return ell_p(1)
    if s in ("linf", "ell_inf", "inf"):
        return ell_inf()
    if s.startswith("lp:"):
        return ell_p(float(s[3:]))
    if s.startswith("poly:"):
        data = json.loads(Path(spec.strip()[5:]).read_text())
        if isinstance(data, dict):
            data = data["generators"]
        return polyhedral(data)
    raise ValueError(f"unrecognised norm {spec!r}")


def sample_norm(kind: str, dim: int, rng: np.random.Generator) -> Norm:
    """A random norm of the given kind (polyhedral: a random symmetric polytope)."""
    if kind == "euclidean":
        return euclidean()
    if kind == "linf":
        return ell_inf()
    if kind == "lp":
        return ell_p(float(rng.choice([1.0, 1.5, 3.0])))
    if kind == "polyhedral":
        while True:
            k = int(rng.integers(dim, 3 * dim + 1))
            g = rng.normal(size=(k, dim))
            try:
                return polyhedral(g)
            except Exception:
                continue
    raise ValueError(f"unknown norm kind {kind!r}")
