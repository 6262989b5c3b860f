from itertools import combinations

import numpy as np
import pytest

from denseroute import (BoundaryCosts, GeometryCase, Grid, ScalarField,
                        curl_gap, extract_path, green_check, line_integral,
                        point_to_boundary_path, point_to_point_path,
                        repeller_same_region_path, solve_value)
from denseroute.errors import PreconditionError, UnsupportedGeometryError


def make_grid(n=64):
    return Grid(a=1.0, b=1.0, nx=n, ny=n)


def positive_u_fields(grid, slope=1.0):
    # U = dc2/dx1 = slope > 0
    c1 = ScalarField.constant(grid, 0.4)
    c2 = ScalarField.from_function(grid, lambda x1, x2: slope * x1 + 0.1)
    return c1, c2


def negative_u_fields(grid, slope=1.0):
    c1 = ScalarField.from_function(grid, lambda x1, x2: slope * x2 + 0.1)
    c2 = ScalarField.constant(grid, 0.4)
    return c1, c2


def attractor_fields(grid):
    # U = x1 - x2: positive north of the diagonal, negative south of it
    c1 = ScalarField.from_function(grid, lambda x1, x2: 0.5 * x2 ** 2 + 0.2)
    c2 = ScalarField.from_function(grid, lambda x1, x2: 0.5 * x1 ** 2 + 0.2)
    return c1, c2


def repeller_fields(grid):
    # U = x2 - x1: negative north of the diagonal, positive south of it
    c1 = ScalarField.from_function(grid, lambda x1, x2: 0.7 - 0.5 * x2 ** 2)
    c2 = ScalarField.from_function(grid, lambda x1, x2: 0.7 - 0.5 * x1 ** 2)
    return c1, c2


def dp_cost(c1, c2, grid, origin, dest):
    target = np.zeros(grid.shape, dtype=bool)
    target[grid.nearest_cell(*dest)] = True
    vf = solve_value(c1, c2, target, grid)
    return vf, float(vf.value[grid.nearest_cell(*origin)])


class TestCurlGapClassification:
    def test_constant_costs_degenerate(self):
        grid = make_grid(16)
        c = ScalarField.constant(grid, 1.0)
        assert curl_gap(c, c, grid).case is GeometryCase.DEGENERATE

    def test_linear_fields_exact_sign(self):
        grid = make_grid(16)
        c1, c2 = negative_u_fields(grid)
        cg = curl_gap(c1, c2, grid)
        assert cg.case is GeometryCase.ALL_NEGATIVE
        assert np.allclose(cg.u.values, -1.0, atol=1e-12)
        c1p, c2p = positive_u_fields(grid)
        cgp = curl_gap(c1p, c2p, grid)
        assert cgp.case is GeometryCase.ALL_POSITIVE
        assert np.allclose(cgp.u.values, 1.0, atol=1e-12)

    def test_attractor_split_curve_on_diagonal(self):
        grid = make_grid(32)
        cg = curl_gap(*attractor_fields(grid), grid)
        assert cg.case is GeometryCase.ATTRACTOR_SPLIT
        assert cg.crossing_at(0.5) == pytest.approx(0.5, abs=grid.h2)
        assert (np.diff(cg.crossing_y) >= -1e-12).all()

    def test_repeller_split_detected(self):
        grid = make_grid(32)
        cg = curl_gap(*repeller_fields(grid), grid)
        assert cg.case is GeometryCase.REPELLER_SPLIT

    def test_interleaved_signs_unsupported(self):
        grid = make_grid(16)
        # U oscillates in x2: no single monotone split
        c1 = ScalarField.from_function(grid, lambda x1, x2: 1 + np.cos(12 * x2))
        c2 = ScalarField.constant(grid, 1.0)
        cg = curl_gap(c1, c2, grid)
        assert cg.case is GeometryCase.UNSUPPORTED
        with pytest.raises(UnsupportedGeometryError):
            point_to_point_path(cg, (0.1, 0.1), (0.9, 0.9))


class TestPointToPoint:
    def test_positive_u_goes_south_first(self):
        grid = make_grid()
        c1, c2 = positive_u_fields(grid)
        cg = curl_gap(c1, c2, grid)
        op = point_to_point_path(cg, (0.2, 0.2), (0.8, 0.8))
        assert op.label == "south_first_L"
        assert np.allclose(op.polyline, [[0.2, 0.2], [0.2, 0.8], [0.8, 0.8]])

    def test_negative_u_goes_east_first(self):
        grid = make_grid()
        c1, c2 = negative_u_fields(grid)
        cg = curl_gap(c1, c2, grid)
        op = point_to_point_path(cg, (0.2, 0.2), (0.8, 0.8))
        assert op.label == "east_first_L"
        assert np.allclose(op.polyline, [[0.2, 0.2], [0.8, 0.2], [0.8, 0.8]])

    @pytest.mark.parametrize("fields", [positive_u_fields, negative_u_fields])
    def test_l_path_cost_matches_dp(self, fields):
        grid = make_grid()
        c1, c2 = fields(grid)
        cg = curl_gap(c1, c2, grid)
        op = point_to_point_path(cg, (0.15, 0.25), (0.85, 0.75))
        vf, dp = dp_cost(c1, c2, grid, (0.15, 0.25), (0.85, 0.75))
        oracle = line_integral(c1, c2, op.staircase, grid)
        assert abs(oracle - dp) <= 2.0 * grid.h1

    def test_dp_path_is_single_l_under_uniform_sign(self):
        grid = make_grid()
        rng = np.random.default_rng(17)
        for sign in (+1.0, -1.0):
            for _ in range(5):
                amp = rng.uniform(0.0, 0.02)
                ph = rng.uniform(0, 2 * np.pi)
                if sign > 0:
                    c1 = ScalarField.from_function(
                        grid, lambda x1, x2: 0.3 + amp * np.sin(3 * x2 + ph))
                    c2 = ScalarField.from_function(
                        grid, lambda x1, x2: 0.5 * x1 + 0.1 + amp * np.sin(2 * x1 + ph))
                else:
                    c1 = ScalarField.from_function(
                        grid, lambda x1, x2: 0.5 * x2 + 0.1 + amp * np.sin(2 * x2 + ph))
                    c2 = ScalarField.from_function(
                        grid, lambda x1, x2: 0.3 + amp * np.sin(3 * x1 + ph))
                cg = curl_gap(c1, c2, grid)
                assert abs(cg.u.values).min() >= 0.1
                vf, _ = dp_cost(c1, c2, grid, (0.1, 0.1), (0.9, 0.9))
                path = extract_path(vf, grid.nearest_cell(0.1, 0.1))
                turns = int(np.sum(np.abs(np.diff(path.steps))))
                assert turns == 1

    def test_attractor_cross_region_three_segments(self):
        grid = make_grid()
        c1, c2 = attractor_fields(grid)
        cg = curl_gap(c1, c2, grid)
        # origin north of the diagonal, destination south of it
        op = point_to_point_path(cg, (0.4, 0.1), (0.6, 0.9))
        assert op.label == "attractor_north_to_south"
        oracle = line_integral(c1, c2, op.staircase, grid)
        _, dp = dp_cost(c1, c2, grid, (0.4, 0.1), (0.6, 0.9))
        assert abs(oracle - dp) <= 2.0 * grid.h1
        # first leg dives south to the curve, middle leg rides it
        poly = op.polyline
        assert poly[0][0] == poly[1][0]
        assert poly[1][1] == pytest.approx(cg.crossing_at(0.4), abs=2 * grid.h2)

    def test_attractor_reverse_crossing_uses_east_reach(self):
        grid = make_grid()
        c1, c2 = attractor_fields(grid)
        cg = curl_gap(c1, c2, grid)
        # origin south of the diagonal, destination north of it
        op = point_to_point_path(cg, (0.1, 0.4), (0.9, 0.6))
        assert op.label == "attractor_south_to_north"
        oracle = line_integral(c1, c2, op.staircase, grid)
        _, dp = dp_cost(c1, c2, grid, (0.1, 0.4), (0.9, 0.6))
        assert abs(oracle - dp) <= 2.0 * grid.h1

    @pytest.mark.parametrize("origin,dest", [
        ((0.5, 0.1), (0.9, 0.5)),   # both north
        ((0.1, 0.5), (0.5, 0.9)),   # both south
    ])
    def test_attractor_same_region_clipped_l(self, origin, dest):
        grid = make_grid()
        c1, c2 = attractor_fields(grid)
        cg = curl_gap(c1, c2, grid)
        op = point_to_point_path(cg, origin, dest)
        oracle = line_integral(c1, c2, op.staircase, grid)
        _, dp = dp_cost(c1, c2, grid, origin, dest)
        assert abs(oracle - dp) <= 2.0 * grid.h1

    def test_on_curve_path_beats_enumeration(self):
        """Both endpoints on the attracting curve: following it is optimal
        among every monotone staircase (exhaustive, 8x8)."""
        grid = make_grid(8)
        c1, c2 = attractor_fields(grid)
        cg = curl_gap(c1, c2, grid)
        x_o = (1 + 0.5) * grid.h1
        x_d = (6 + 0.5) * grid.h1
        op = point_to_point_path(cg, (x_o, x_o), (x_d, x_d))
        oracle = line_integral(c1, c2, op.staircase, grid)
        best = np.inf
        for east_pos in combinations(range(10), 5):
            i, j = 1, 1
            cells = [(1, 1)]
            for step in range(10):
                if step in east_pos:
                    i += 1
                else:
                    j += 1
                cells.append((i, j))
            from denseroute.paths import StaircasePath
            best = min(best, line_integral(c1, c2, StaircasePath(cells), grid))
        assert oracle <= best + 1e-12

    def test_not_southeast_rejected(self):
        grid = make_grid(16)
        c1, c2 = positive_u_fields(grid)
        cg = curl_gap(c1, c2, grid)
        with pytest.raises(PreconditionError):
            point_to_point_path(cg, (0.8, 0.2), (0.2, 0.8))


def boundary_positive_fields(grid):
    # U = 1 - 0.6(1-x1) >= 0.4; c2 vanishes on the east edge, c1 = 0.2 on the
    # south edge: the sign hypotheses hold with the field traces
    c1 = ScalarField.from_function(grid, lambda x1, x2: 0.2 + (1.0 - x2))
    c2 = ScalarField.from_function(grid, lambda x1, x2: 0.3 * (1.0 - x1) ** 2)
    return c1, c2


def boundary_negative_fields(grid):
    # mirror: c1 vanishes on the south edge, c2 positive on the east edge
    c1 = ScalarField.from_function(grid, lambda x1, x2: 0.3 * (1.0 - x2) ** 2)
    c2 = ScalarField.from_function(grid, lambda x1, x2: 0.2 + (1.0 - x1))
    return c1, c2


class TestPointToBoundary:
    def test_positive_u_vertical_to_gamma1(self):
        grid = make_grid()
        c1, c2 = boundary_positive_fields(grid)
        cg = curl_gap(c1, c2, grid)
        assert cg.case is GeometryCase.ALL_POSITIVE
        op = point_to_boundary_path(cg, (0.3, 0.1))
        assert op.label == "vertical_to_gamma1"
        assert np.allclose(op.polyline, [[0.3, 0.1], [0.3, 1.0]])

    def test_negative_u_horizontal_to_gamma2(self):
        grid = make_grid()
        c1, c2 = boundary_negative_fields(grid)
        cg = curl_gap(c1, c2, grid)
        assert cg.case is GeometryCase.ALL_NEGATIVE
        op = point_to_boundary_path(cg, (0.3, 0.1))
        assert op.label == "horizontal_to_gamma2"
        assert np.allclose(op.polyline, [[0.3, 0.1], [1.0, 0.1]])

    @pytest.mark.parametrize("fields", [boundary_positive_fields,
                                        boundary_negative_fields])
    def test_matches_dp_to_boundary(self, fields):
        grid = make_grid()
        c1, c2 = fields(grid)
        cg = curl_gap(c1, c2, grid)
        op = point_to_boundary_path(cg, (0.3, 0.2))
        target = np.zeros(grid.shape, dtype=bool)
        target[:, -1] = True
        target[-1, :] = True
        vf = solve_value(c1, c2, target, grid)
        dp = float(vf.value[grid.nearest_cell(0.3, 0.2)])
        oracle = line_integral(c1, c2, op.staircase, grid)
        assert abs(oracle - dp) <= 2.0 * max(grid.h1, grid.h2)

    def test_sign_hypothesis_violation_named(self):
        grid = make_grid(16)
        c1, c2 = boundary_positive_fields(grid)
        cg = curl_gap(c1, c2, grid)
        with pytest.raises(PreconditionError, match="Gamma2"):
            point_to_boundary_path(cg, (0.3, 0.1), BoundaryCosts(gamma2=0.5))
        with pytest.raises(PreconditionError, match="Gamma1"):
            point_to_boundary_path(cg, (0.3, 0.1), BoundaryCosts(gamma1=-0.5))
        # interior traces that violate the hypotheses are caught too
        bad = curl_gap(*positive_u_fields(grid), grid)
        with pytest.raises(PreconditionError, match="Gamma2"):
            point_to_boundary_path(bad, (0.3, 0.1))

    def test_split_field_rejected(self):
        grid = make_grid(16)
        cg = curl_gap(*attractor_fields(grid), grid)
        with pytest.raises(UnsupportedGeometryError):
            point_to_boundary_path(cg, (0.3, 0.1))


class TestRepeller:
    def test_same_region_l_paths(self):
        grid = make_grid()
        c1, c2 = repeller_fields(grid)
        cg = curl_gap(c1, c2, grid)
        north = repeller_same_region_path(cg, (0.5, 0.1), (0.9, 0.35))
        assert north.label == "repeller_north_L"
        assert north.in_region_only
        south = repeller_same_region_path(cg, (0.1, 0.55), (0.4, 0.9))
        assert south.label == "repeller_south_L"

    @pytest.mark.parametrize("origin,dest,region", [
        ((0.5, 0.1), (0.9, 0.35), "north"),
        ((0.1, 0.55), (0.4, 0.9), "south"),
    ])
    def test_matches_dp_restricted_to_region(self, origin, dest, region):
        grid = make_grid()
        c1, c2 = repeller_fields(grid)
        cg = curl_gap(c1, c2, grid)
        op = repeller_same_region_path(cg, origin, dest)
        # wall off the other region with prohibitive costs
        x1, x2 = grid.cell_centers()
        outside = (x2 > x1) if region == "north" else (x2 < x1)
        wall = np.where(outside, 1e3, 0.0)
        c1m = ScalarField(grid, c1.values + wall)
        c2m = ScalarField(grid, c2.values + wall)
        _, dp = dp_cost(c1m, c2m, grid, origin, dest)
        oracle = line_integral(c1, c2, op.staircase, grid)
        assert abs(oracle - dp) <= 2.0 * grid.h1

    def test_cross_region_unsupported(self):
        grid = make_grid(32)
        cg = curl_gap(*repeller_fields(grid), grid)
        with pytest.raises(UnsupportedGeometryError):
            repeller_same_region_path(cg, (0.5, 0.1), (0.6, 0.9))
        with pytest.raises(UnsupportedGeometryError):
            point_to_point_path(cg, (0.5, 0.1), (0.6, 0.9))


class TestGreenSignConsistency:
    @pytest.mark.parametrize("seed", range(5))
    def test_optimal_vs_comparison_loop_sign(self, seed):
        """Traversing the optimal L forward and any comparison staircase
        backward yields a negative circulation when U > 0: the area between
        counts against the northern route."""
        grid = make_grid(32)
        rng = np.random.default_rng(seed)
        slope = rng.uniform(0.5, 2.0)
        c1, c2 = positive_u_fields(grid, slope=slope)
        io, jo = 3, 4
        id_, jd = 25, 28
        loop = [(io, jo), (io, jd), (id_, jd), (id_, jo)]
        loop_int, area_int = green_check(c1, c2, loop, grid)
        assert area_int < 0
        assert loop_int < 0
        assert abs(loop_int - area_int) <= 1e-3 * (abs(loop_int) + abs(area_int) + 1)
