import numpy as np
import pytest

from denseroute import (Grid, Mode, SeparableSolution, divergence,
                        equalized_cost_residual, fit_stream_modes,
                        flows_from_stream, reference_solutions,
                        scenario_from_dict, solve_wardrop, stream_from_flows,
                        stream_function)
from denseroute.errors import DomainError


def single_mode(k1=1.0, k2=2.0):
    return SeparableSolution(a=1.0, b=1.0, k1=k1, k2=k2,
                             modes=[Mode(s=1.0, A=1.0, D=1.0)])


def pde_residual_fd(sol, n=33, eps=1e-4):
    """k1 phi_x2x2 + k2 phi_x1x1 by centered second differences."""
    xs = np.linspace(0.2, 0.8, n)
    x1, x2 = np.meshgrid(xs, xs, indexing="ij")
    d11 = (sol.phi(x1 + eps, x2) - 2 * sol.phi(x1, x2) + sol.phi(x1 - eps, x2)) / eps ** 2
    d22 = (sol.phi(x1, x2 + eps) - 2 * sol.phi(x1, x2) + sol.phi(x1, x2 - eps)) / eps ** 2
    res = sol.k1 * d22 + sol.k2 * d11
    scale = np.abs(sol.phi(x1, x2)).max()
    return np.abs(res).max() / max(scale, 1e-300)


class TestSeparableSolution:
    def test_single_mode_satisfies_pde(self):
        assert pde_residual_fd(single_mode()) <= 1e-6

    def test_all_reference_solutions_satisfy_pde(self):
        for sol in reference_solutions():
            if sol.modes:
                assert pde_residual_fd(sol) <= 1e-6

    def test_linear_term_gives_uniform_flow(self):
        sol = SeparableSolution(a=1.0, b=1.0, k1=1.0, k2=1.0, linear=(-1.0, 0.0))
        t1, t2 = sol.flow_at(0.3, 0.7)
        assert (t1, t2) == (0.0, 1.0)
        grid = Grid(a=1.0, b=1.0, nx=16, ny=16)
        sample = flows_from_stream(sol, grid)
        div = divergence(sample.flow)
        # interior conservation is exact; the zero-flux walls absorb the
        # uniform stream at the north and south rows
        assert np.abs(div.values[:, 1:-1]).max() == 0.0

    def test_gradient_matches_finite_differences(self):
        sol = SeparableSolution(
            a=1.0, b=1.0, k1=1.3, k2=0.7,
            modes=[Mode(s=0.9, A=1.0, B=0.2, C=0.5, D=1.0),
                   Mode(s=1.6, A=0.3, B=-0.4, C=1.0, D=0.2)],
            linear=(0.5, -0.3))
        eps = 1e-6
        rng = np.random.default_rng(1)
        for x1, x2 in rng.uniform(0.1, 0.9, (10, 2)):
            _, d1, d2 = stream_function(sol, (x1, x2))
            fd1 = (sol.phi(x1 + eps, x2) - sol.phi(x1 - eps, x2)) / (2 * eps)
            fd2 = (sol.phi(x1, x2 + eps) - sol.phi(x1, x2 - eps)) / (2 * eps)
            assert d1 == pytest.approx(fd1, rel=1e-6, abs=1e-8)
            assert d2 == pytest.approx(fd2, rel=1e-6, abs=1e-8)

    def test_outside_domain_rejected(self):
        sol = single_mode()
        with pytest.raises(DomainError):
            stream_function(sol, (1.5, 0.5))
        with pytest.raises(DomainError):
            sol.phi(0.5, -0.2)


def refinement_orders(sol, measure, grids=(16, 32, 64)):
    values = []
    for n in grids:
        grid = Grid(a=sol.a, b=sol.b, nx=n, ny=n)
        values.append(measure(sol, grid))
    orders = [np.log2(a / b) for a, b in zip(values, values[1:])]
    return values, orders


def divergence_measure(sol, grid):
    sample = flows_from_stream(sol, grid)
    return float(np.abs(divergence(sample.flow).values[1:-1, 1:-1]).max())


def equalized_measure(sol, grid):
    sample = flows_from_stream(sol, grid)
    _, mx = equalized_cost_residual(sample.flow, sol.k1, sol.k2)
    return mx


class TestRefinement:
    @pytest.mark.parametrize("measure", [divergence_measure, equalized_measure])
    def test_sampled_identities_decay_second_order(self, measure):
        for sol in reference_solutions():
            if not sol.modes:
                continue  # affine term is exact at every resolution
            _, orders = refinement_orders(sol, measure)
            assert min(orders) >= 1.8

    def test_uniform_flow_residual_exactly_zero(self):
        grid = Grid(a=1.0, b=1.0, nx=16, ny=16)
        sol = SeparableSolution(a=1.0, b=1.0, k1=1.0, k2=1.0, linear=(-2.0, 1.0))
        sample = flows_from_stream(sol, grid)
        res, mx = equalized_cost_residual(sample.flow, 1.0, 1.0)
        assert mx == 0.0


class TestStreamInversion:
    def test_round_trip_through_flows(self):
        sol = single_mode()
        grid = Grid(a=1.0, b=1.0, nx=48, ny=48)
        sample = flows_from_stream(sol, grid)
        phi, closure = stream_from_flows(sample.flow)
        assert closure <= 1e-4 * np.abs(phi).max()
        # matches the analytic stream up to an additive constant
        x1 = (np.arange(1, grid.nx) * grid.h1)[:, None]
        x2 = (np.arange(1, grid.ny) * grid.h2)[None, :]
        exact = sol.phi(np.broadcast_to(x1, phi.shape),
                        np.broadcast_to(x2, phi.shape))
        diff = phi - exact
        diff -= diff.mean()
        assert np.abs(diff).max() <= 1e-3 * np.abs(exact).max()

    def test_mode_fit_recovers_solution(self):
        sol = SeparableSolution(a=1.0, b=1.0, k1=1.0, k2=2.0,
                                modes=[Mode(s=1.0, A=1.0, D=1.0),
                                       Mode(s=1.8, B=0.5, C=0.7)],
                                linear=(0.3, -0.2))
        grid = Grid(a=1.0, b=1.0, nx=32, ny=32)
        sample = flows_from_stream(sol, grid)
        phi, _ = stream_from_flows(sample.flow)
        fitted, misfit = fit_stream_modes(phi, grid, sol.k1, sol.k2, [1.0, 1.8])
        assert misfit <= 1e-3


def sheared_sheet_scenario(n, tol, max_iters=120000):
    """Sources on the northern half of the west edge, free-choice sinks on
    the southern half of the east edge: the equilibrium is a smooth sheet of
    strictly positive interior flow shearing south-east."""
    half = n // 2
    cells = [{"cell": [0, j], "rate": 1.0 / half} for j in range(half)]
    cells += [{"cell": [n - 1, j], "rate": -1.0 / (n - half)} for j in range(half, n)]
    return scenario_from_dict({
        "grid": {"a": 1.0, "b": 1.0, "nx": n, "ny": n},
        "cost_model": {"type": "affine", "k1": 1.0, "k2": 1.0,
                       "h1": 0.0, "h2": 0.0},
        "demand": [{"class": 0, "cells": cells}],
        "solver": {"tol": tol, "max_iters": max_iters},
    })


@pytest.mark.slow
class TestWardropCrossValidation:
    def test_exact_equilibrium_satisfies_identity_at_every_grid(self):
        """For the multiplier-derived equilibrium flow the discrete residual
        k1 dT1/dx2 - k2 dT2/dx1 vanishes identically (discrete mixed
        differences of the multiplier commute)."""
        from denseroute import solve_affine_direct
        for n in (8, 16, 32):
            sc = scenario_from_dict({
                "grid": {"a": 1.0, "b": 1.0, "nx": n, "ny": n},
                "cost_model": {"type": "affine", "k1": 1.0, "k2": 1.0,
                               "h1": 0.0, "h2": 0.0},
                "demand": [{"class": 0, "cells": [
                    {"cell": [0, 0], "rate": 1.0},
                    {"cell": [n - 1, n - 1], "rate": -1.0}]}],
            })
            res = solve_affine_direct(sc)
            _, mx = equalized_cost_residual(res.flows[0], 1.0, 1.0)
            scale = max(res.flows[0].t1.max(), res.flows[0].t2.max()) / sc.grid.h1
            assert mx <= 1e-9 * scale

    def test_equalized_cost_residual_shrinks_with_the_gap(self):
        """The numeric equilibrium approaches the identity as the
        equilibrium gap tightens (fixed grid; the residual of a Frank-Wolfe
        iterate is pure solver noise, so it tracks the gap, not h)."""
        maxima = []
        for tol in (3e-3, 3e-4, 3e-5):
            sc = sheared_sheet_scenario(12, tol)
            res = solve_wardrop(sc)
            assert res.converged
            flow = res.flows[0]
            resid, _ = equalized_cost_residual(flow, 1.0, 1.0)
            t_node = 0.25 * (flow.t1[:, 1:] + flow.t1[:, :-1]
                             + flow.t2[1:, :] + flow.t2[:-1, :])
            maxima.append(np.abs(resid).max() * sc.grid.h1 / t_node.max())
        assert maxima[2] < maxima[1] < maxima[0]

    def test_wardrop_stream_matches_mode_fit(self):
        sc = sheared_sheet_scenario(64, 1e-4)
        res = solve_wardrop(sc)
        assert res.converged
        flow = res.flows[0]
        interior = (flow.t1[:, 1:] + flow.t1[:, :-1]
                    + flow.t2[1:, :] + flow.t2[:-1, :])
        assert (interior > 0).mean() > 0.95  # strictly positive interior sheet
        phi, closure = stream_from_flows(flow)
        assert closure <= 1e-2 * (np.abs(phi).max() + 1e-300)
        _, misfit = fit_stream_modes(phi, sc.grid, 1.0, 1.0,
                                     [0.5, 1.0, 2.0, 4.0, 8.0])
        assert misfit <= 5e-2
