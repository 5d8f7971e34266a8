"""Norms, midpoint and hull defects, distance certificates, witness sets and Euclidean sharp bounds."""

from .hull import (
    Certificate,
    DefectReport,
    OutsideHull,
    PointSet,
    caratheodory_weights,
    certify_hull_point,
    defect_report,
    dist_to_set,
    dists_to_set,
    exact_weights,
    hull_defect_estimate,
    in_hull,
    midpoint_defect,
)
from .norms import Norm, ell_inf, ell_p, euclidean, norm_eval, parse_norm, polyhedral, sample_norm
from .sharp import (
    alternate_labels,
    euclid_radius_bound,
    hexagon_check,
    maxside,
    random_sphere_config,
    random_symmetric_hexagon,
    regular_edge,
    regular_midpoint_norm,
    regular_simplex,
)
from .witness import WitnessError, WitnessSet, brute_force_defect, delta1_near_supremum, witness_set

SEVEN_POINTS = [
    (-3 * 3 ** 0.5, 0.0), (3 * 3 ** 0.5, 0.0),
    (-2 * 3 ** 0.5, 1.0), (2 * 3 ** 0.5, 1.0),
    (-(3 ** 0.5), 2.0), (3 ** 0.5, 2.0),
    (0.0, 1.0),
]
