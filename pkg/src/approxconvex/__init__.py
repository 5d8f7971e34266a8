"""Extremal approximately convex functions on simplices and sharp convex-hull defect certificates."""

from .dyadic import DyadicRational, DyadicSimplexPoint, frac, make_dyadic, split_support, support
from .extremal import (
    NON_DYADIC,
    Enclosure,
    MaxWitness,
    e_delta1,
    e_point,
    h_digit_bound,
    h_dyadic,
    h_enclose,
    kappa,
    kappa_real,
    max_witness,
    self_similar_map,
)
from .solver import (
    DyadicGrid,
    GridFunction,
    PolytopeSpec,
    e_function,
    polytope_extremal,
    s_step,
    solve_lower,
    solve_upper,
)

__version__ = "0.1.0"
