import numpy as np
import pytest

from approxconvex.extremal import kappa
from approxconvex.solver import DyadicGrid, e_function
from approxconvex.stability import (
    SampledFunction,
    convex_minorant,
    e_samples,
    midpoint_violations,
    minorant_at_samples,
    read_samples,
    stability_report,
)

from .oracles import lower_envelope_hull


def random_function(rng, n, dim):
    P = rng.uniform(-1, 1, size=(n, dim))
    return SampledFunction(P, rng.normal(size=n), 1.0)


def test_convex_samples_are_reproduced():
    rng = np.random.default_rng(0)
    P = rng.uniform(-1, 1, size=(40, 2))
    s = SampledFunction(P, (P ** 2).sum(axis=1), 0.0)
    rep = stability_report(s)
    assert rep.sup_gap == pytest.approx(0, abs=1e-9) and rep.passed
    assert np.allclose(rep.minorant, s.values, atol=1e-9)


def test_single_sample():
    s = SampledFunction([[0.3, 0.4]], [2.5], 0.1)
    assert convex_minorant(s, [0.3, 0.4]) == 2.5
    with pytest.raises(ValueError):
        convex_minorant(s, [0, 0])


def test_outside_rejected():
    s = SampledFunction([[0.0], [1.0]], [0, 1], 0)
    with pytest.raises(ValueError):
        convex_minorant(s, [2.0])
    with pytest.raises(ValueError):
        convex_minorant(s, [0.5, 0.5])


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_matches_lower_hull_oracle(dim):
    rng = np.random.default_rng(dim)
    for _ in range(3):
        s = random_function(rng, 30, dim)
        assert np.allclose(minorant_at_samples(s), lower_envelope_hull(s.points, s.values), atol=1e-9)


def test_minorant_is_convex_below_samples():
    rng = np.random.default_rng(5)
    s = random_function(rng, 40, 2)
    g = minorant_at_samples(s)
    assert np.all(g <= s.values + 1e-9)
    W = rng.dirichlet(np.ones(40), size=(200, 2))
    Y, Z = W[:, 0] @ s.points, W[:, 1] @ s.points
    for y, z in zip(Y, Z):
        gy, gz = convex_minorant(s, y), convex_minorant(s, z)
        assert convex_minorant(s, (y + z) / 2) <= (gy + gz) / 2 + 1e-9


def test_segment_e_samples():
    s = e_samples(1, 8, 0.5)
    rep = stability_report(s)
    assert 0.5 * (2 - 2 ** -6) <= rep.sup_gap <= 0.5 * 2
    assert rep.passed and rep.kappa_bound == 1.0 and rep.offset == 0.5
    assert np.allclose(rep.minorant, 0, atol=1e-9)
    assert not midpoint_violations(s)


def test_triangle_e_samples():
    s = e_samples(2, 5, 1.0)
    grid_max = max(e_function(DyadicGrid(2, 5)).values())
    rep = stability_report(s)
    assert rep.sup_gap == pytest.approx(float(grid_max), abs=1e-9)
    assert rep.sup_gap <= kappa(2) and rep.passed
    assert np.allclose(rep.minorant, 0, atol=1e-9)


def test_violations_detected():
    s = SampledFunction([[0.0], [0.5], [1.0]], [0, 2, 0], 1.0)
    assert midpoint_violations(s) == [(0, 2, 1)]
    assert not midpoint_violations(SampledFunction(s.points, s.values, 2.0))


def test_gap_beyond_bound_fails():
    # 3 above the chord violates the eps-midpoint condition, and the gap exceeds kappa(1) * eps
    s = SampledFunction([[0.0], [0.5], [1.0]], [0, 3, 0], 1.0)
    rep = stability_report(s)
    assert rep.sup_gap == pytest.approx(3) and not rep.passed


def test_report_json():
    rep = stability_report(e_samples(1, 3, 1.0))
    out = rep.to_json()
    assert out["pass"] and out["two_sided"] == {"g<=f": True, "f<=g+kappa*eps": True}
    assert out["kappa_bound"] == 2.0


def test_read_samples(tmp_path):
    text = "x,value\n0,0\n0.5,1\n1,0\n"
    s = read_samples(text, 1.0)
    assert s.points.shape == (3, 1) and s.values.tolist() == [0, 1, 0]
    path = tmp_path / "s.csv"
    path.write_text("0,0,1\n1,0,2\n0,1,3\n")
    s = read_samples(str(path), 0.5)
    assert s.dim == 2 and s.epsilon == 0.5
    with pytest.raises(ValueError):
        read_samples("1\n2\n", 1.0)
