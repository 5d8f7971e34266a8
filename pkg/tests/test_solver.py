import io
import random
from fractions import Fraction

import numpy as np
import pytest

from approxconvex.extremal import e_delta1, e_point
from approxconvex.solver import (
    DyadicGrid,
    NotConverged,
    PolytopeSpec,
    affine_function,
    e_function,
    grid_function,
    midpoint_violations,
    polytope_extremal,
    preimage_vertices,
    read_csv,
    s_step,
    solve_lower,
    solve_upper,
    upper_seed,
    write_csv,
)

from .oracles import fixed_point_naive, simplex_grid

F = Fraction


def exact_e(grid):
    return [e_point(grid.point(i)) for i in range(len(grid))]


def as_dict(f):
    return {tuple(int(c) for c in p): f.value(i) for i, p in enumerate(f.grid.points)}


class TestGrid:
    @pytest.mark.parametrize("dim,depth", [(1, 3), (2, 3), (3, 2), (4, 1)])
    def test_enumerates_every_point_once(self, dim, depth):
        g = DyadicGrid(dim, depth)
        assert sorted(map(tuple, g.points.tolist())) == sorted(simplex_grid(dim, depth))
        for i, p in enumerate(g.points):
            assert g.index(p) == i

    def test_vertices(self):
        g = DyadicGrid(2, 2)
        assert sorted(tuple(g.points[i]) for i in g.vertex_index) == [(0, 0, 4), (0, 4, 0), (4, 0, 0)]
        assert g.face_dim[g.index([2, 2, 0])] == 1 and g.face_dim[g.index([1, 1, 2])] == 2

    def test_all_splits_listed(self):
        g = DyadicGrid(2, 2)
        pts = simplex_grid(2, 2)
        expected = set()
        for y in pts:
            for z in pts:
                if y < z and all((a + b) % 2 == 0 for a, b in zip(y, z)):
                    expected.add((y, z))
        got = set()
        for a, b in zip(g.pair_y, g.pair_z):
            y, z = tuple(g.points[a]), tuple(g.points[b])
            got.add((min(y, z), max(y, z)))
        assert got == expected
        assert g.n_pairs == len(expected)


class TestSStep:
    def test_single_split(self):
        g = DyadicGrid(1, 1)
        f = grid_function(g, [0, 1, 0])
        assert s_step(f).values() == [0, 1, 0]

    def test_face_seed_quarter(self):
        g = DyadicGrid(1, 2)
        f = grid_function(g, [0, 1, 1, 1, 0])
        assert s_step(f).at([1, 3]) == F(3, 2)
        assert s_step(f).at([3, 1]) == F(3, 2)

    @pytest.mark.parametrize("dim,depth", [(1, 6), (2, 4), (3, 3)])
    def test_e_is_fixed(self, dim, depth):
        g = DyadicGrid(dim, depth)
        e = e_function(g)
        assert e.values() == exact_e(g)
        assert s_step(e).values() == e.values()

    def test_vertices_reset_to_phi(self):
        g = DyadicGrid(1, 2)
        f = grid_function(g, [5, 1, 1, 1, 7], phi=(2, 3))
        out = s_step(f)
        assert out.at([4, 0]) == 2 and out.at([0, 4]) == 3


class TestSolveUpper:
    def test_segment_depth_two(self):
        f = solve_upper(DyadicGrid(1, 2))
        assert f.converged
        assert f.values() == [0, F(3, 2), 1, F(3, 2), 0]
        assert f.values() == [e_delta1(F(int(p[1]), 4)) for p in f.grid.points]

    def test_segment_depth_one(self):
        g = DyadicGrid(1, 1)
        assert s_step(upper_seed(g)).values() == [0, 1, 0]
        f = solve_upper(g)
        assert f.values() == [0, 1, 0] and f.iterations == 1

    @pytest.mark.parametrize("dim,depth", [(1, 8), (2, 3), (2, 5), (3, 3), (3, 4)])
    def test_fixed_point_is_e(self, dim, depth):
        g = DyadicGrid(dim, depth)
        f = solve_upper(g, strict=True)
        assert f.same_values(e_function(g))
        assert all(f.history)

    @pytest.mark.parametrize("dim,depth,phi", [(1, 3, (0, 0)), (2, 2, (0, 1, F(1, 2))), (1, 3, (3, -1))])
    def test_matches_naive_iteration(self, dim, depth, phi):
        f = solve_upper(DyadicGrid(dim, depth), phi)
        assert as_dict(f) == fixed_point_naive(dim, depth, phi)

    def test_nonzero_phi_is_e_plus_affine(self):
        for dim, depth, phi in [(1, 5, (1, -2)), (2, 4, (F(1, 3), 2, -1)), (3, 3, (0, 1, 2, 3))]:
            g = DyadicGrid(dim, depth)
            f = solve_upper(g, phi, strict=True)
            aff = affine_function(g, phi)
            assert f.values() == [a + b for a, b in zip(e_function(g).values(), aff.values())]

    def test_non_convergence_reported(self):
        g = DyadicGrid(2, 4)
        f = solve_upper(g, max_iters=1)
        assert not f.converged and f.residual > 0
        with pytest.raises(NotConverged) as info:
            solve_upper(g, max_iters=1, strict=True)
        assert info.value.residual == f.residual

    def test_approximately_convex(self):
        for dim, depth in [(1, 6), (2, 4), (3, 3)]:
            f = solve_upper(DyadicGrid(dim, depth))
            assert midpoint_violations(f) == 0
            assert midpoint_violations(f, slack=F(1, 2)) > 0


class TestSolveLower:
    def test_segment_depth_two_from_zero(self):
        g = DyadicGrid(1, 2)
        h = solve_lower(g, seed="zero")
        assert h.values() == [0, F(3, 2), 1, F(3, 2), 0]
        assert all(h.history)

    def test_segment_depth_one(self):
        assert solve_lower(DyadicGrid(1, 1)).values() == [0, 1, 0]

    @pytest.mark.parametrize("dim,depth", [(1, 8), (2, 5), (3, 4)])
    def test_reaches_e(self, dim, depth):
        g = DyadicGrid(dim, depth)
        assert solve_lower(g, strict=True).same_values(e_function(g))

    def test_zero_seed_needs_zero_phi(self):
        with pytest.raises(ValueError):
            solve_lower(DyadicGrid(1, 2), phi=(1, 0), seed="zero")
        with pytest.raises(ValueError):
            solve_lower(DyadicGrid(1, 2), seed="bogus")


@pytest.mark.parametrize("dim,depth", [(1, 5), (2, 4), (3, 3)])
def test_every_iterate_sandwiches_e(dim, depth):
    g = DyadicGrid(dim, depth)
    e = np.array(exact_e(g), dtype=object)
    f = upper_seed(g)
    h = affine_function(g)
    for _ in range(40):
        fv = np.array(f.values(), dtype=object)
        hv = np.array(h.values(), dtype=object)
        assert np.all(hv <= e) and np.all(e <= fv)
        nf = s_step(f)
        assert np.all(np.array(nf.values(), dtype=object) <= fv)
        s = np.array(s_step(h).values(), dtype=object)
        h = grid_function(g, np.maximum(hv, s).tolist())
        f = nf


def test_maximum_principle_for_shifted_boundary():
    rng = random.Random(1)
    for dim, depth in [(1, 5), (2, 3), (3, 2)]:
        g = DyadicGrid(dim, depth)
        for _ in range(4):
            phi = [F(rng.randint(-8, 8), 4) for _ in range(dim + 1)]
            shift = [p + F(rng.randint(0, 8), 8) for p in phi]
            c = max(b - a for a, b in zip(phi, shift))
            lo = solve_upper(g, phi)
            hi = solve_upper(g, shift)
            assert all(b <= a + c for a, b in zip(lo.values(), hi.values()))
            assert all(b >= a for a, b in zip(lo.values(), hi.values()))


def test_csv_round_trip():
    g = DyadicGrid(2, 3)
    f = solve_upper(g, (0, F(1, 3), -1))
    text = write_csv(f)
    assert text.splitlines()[0] == "x0,x1,x2,value"
    back = read_csv(text, phi=f.phi)
    assert back.values() == f.values() and back.phi == f.phi
    buf = io.StringIO()
    write_csv(f, buf)
    assert buf.getvalue() == text


def test_csv_rejects_partial_grid():
    g = DyadicGrid(1, 2)
    text = "\n".join(write_csv(solve_upper(g)).splitlines()[:-1])
    with pytest.raises(ValueError):
        read_csv(text)


class TestPolytope:
    TRIANGLE = PolytopeSpec(((0, 0), (2, 0), (0, 2)), None)
    SQUARE = PolytopeSpec(((0, 0), (1, 0), (1, 1), (0, 1)), None)

    def test_simplex_edge_midpoint(self):
        enc = polytope_extremal(self.TRIANGLE, (1, 0))
        assert enc.contains(1) and enc.width <= F(1, 2 ** 30)

    def test_vertex_with_phi(self):
        spec = PolytopeSpec(self.TRIANGLE.vertices, (F(3, 2), -1, 4))
        enc = polytope_extremal(spec, (2, 0))
        assert enc.lo == enc.hi == -1

    def test_square_center(self):
        enc = polytope_extremal(self.SQUARE, (F(1, 2), F(1, 2)))
        assert enc.hi <= 2 and enc.lo >= 0
        # both diagonals give preimage (1/2, 0, 1/2, 0) with E = 1, and no preimage does better
        assert enc.contains(1)
        assert 1 - enc.lo <= F(1, 2 ** 40)

    def test_square_preimages(self):
        verts = preimage_vertices(self.SQUARE, (F(1, 2), F(1, 2)))
        assert set(verts) == {(F(1, 2), 0, F(1, 2), 0), (0, F(1, 2), 0, F(1, 2))}

    def test_outside_rejected(self):
        with pytest.raises(ValueError):
            polytope_extremal(self.SQUARE, (2, 0))

    def test_simplex_agrees_with_e(self):
        rng = random.Random(3)
        verts = ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1))
        spec = PolytopeSpec(verts, None)
        for _ in range(20):
            cuts = sorted(rng.randint(0, 64) for _ in range(3))
            alpha = [F(b - a, 64) for a, b in zip([0] + cuts, cuts + [64])]
            x = alpha[1:]
            enc = polytope_extremal(spec, x, depth=4)
            assert enc.contains(e_point(alpha))

    def test_bounds_bracket_grid_oracle(self):
        # brute force over depth-5 barycentric grid points that map onto the query
        spec = PolytopeSpec(((0,), (1,), (F(1, 2),)), (0, 0, F(1, 4)))
        x = (F(3, 8),)
        enc = polytope_extremal(spec, x, depth=5)
        best = None
        for p in simplex_grid(2, 5):
            a = [F(c, 32) for c in p]
            if a[1] + a[2] / 2 == x[0]:
                v = e_point(a) + a[2] / 4
                best = v if best is None else min(best, v)
        assert enc.lo <= best
        assert enc.hi <= best
