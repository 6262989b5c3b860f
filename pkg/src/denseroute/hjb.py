"""Minimum-cost-to-go fields and greedy flow loading on the east/south DAG.

Because moves only go east or south, the dynamic-programming recursion

    V(i, j) = min(c1_face * h1 + V(i+1, j),  c2_face * h2 + V(i, j+1))

has an acyclic dependency graph and solves exactly in one reverse sweep; no
iteration, no relaxation error. V is zero on the target set, +inf marks
cells that cannot reach any target. Ties between the east and south branch
are broken east-first and counted, since cost-equal alternatives matter when
comparing against closed-form path constructions.

Edge costs are the face means of the cell cost fields times the spacing,
which is the same quadrature `line_integral` uses, so the extracted path
reproduces V(origin) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import PreconditionError, ValidationError
from .grid import FlowField, Grid, ScalarField
from .paths import StaircasePath, _values

UNREACHABLE = float("inf")


@dataclass
class ValueField:
    """DP solution: value per cell, target mask, greedy policy, provenance."""

    grid: Grid
    value: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)
    policy: np.ndarray = field(repr=False)
    tie_count: int = 0
    tie_break: str = "east"

    def as_scalar_field(self) -> ScalarField:
        return ScalarField(self.grid, self.value, allow_inf=True)

    def reachable(self) -> np.ndarray:
        return np.isfinite(self.value)


def edge_costs_from_cells(c1, c2, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Face-mean edge costs: east moves (nx-1, ny), south moves (nx, ny-1)."""
    c1 = _values(c1)
    c2 = _values(c2)
    east = 0.5 * (c1[:-1, :] + c1[1:, :]) * grid.h1
    south = 0.5 * (c2[:, :-1] + c2[:, 1:]) * grid.h2
    return east, south


def solve_value(c1, c2, target: np.ndarray, grid: Grid) -> ValueField:
    """Exact reverse-sweep solve of the discrete minimum-cost-to-go field.

    c1, c2 are nonnegative cell cost fields; target is a boolean cell mask
    (must be nonempty) on which V = 0.
    """
    target = np.asarray(target, dtype=bool)
    if target.shape != grid.shape:
        raise ValidationError(f"target mask shape {target.shape} != grid {grid.shape}")
    if not target.any():
        raise PreconditionError("target set is empty")
    c1 = _values(c1)
    c2 = _values(c2)
    if (c1 < 0).any() or (c2 < 0).any():
        raise ValidationError("cost fields must be nonnegative")
    east, south = edge_costs_from_cells(c1, c2, grid)
    return solve_value_edges(east, south, target, grid)


def solve_value_edges(east_cost: np.ndarray, south_cost: np.ndarray,
                      target: np.ndarray, grid: Grid) -> ValueField:
    """DP solve on explicit per-edge move costs (used directly by the
    assignment solvers, where edge costs come from face flows)."""
    value, policy = kernels.value_sweep(east_cost, south_cost, target)
    tie_count = _count_ties(east_cost, south_cost, value, target)
    return ValueField(grid=grid, value=value, target=np.asarray(target, dtype=bool),
                      policy=policy, tie_count=tie_count)


def _count_ties(east_cost, south_cost, value, target) -> int:
    nx, ny = value.shape
    interior = ~np.asarray(target, dtype=bool)
    interior[-1, :] = False
    interior[:, -1] = False
    e = east_cost[:, :] + value[1:, :]
    s = south_cost[:, :] + value[:, 1:]
    both = interior[:-1, :-1] & np.isfinite(e[:, :-1]) & np.isfinite(s[:-1, :])
    return int(np.count_nonzero(both & (e[:, :-1] == s[:-1, :])))


def bellman_residual(vf: ValueField, east_cost: np.ndarray, south_cost: np.ndarray) -> float:
    """Max |min-branch residual| over reachable non-target cells (0 exactly
    for a correct sweep; exposed for diagnostics and tests)."""
    nx, ny = vf.value.shape
    best = np.full((nx, ny), np.inf)
    best[:-1, :] = np.minimum(best[:-1, :], east_cost + vf.value[1:, :])
    best[:, :-1] = np.minimum(best[:, :-1], south_cost + vf.value[:, 1:])
    mask = vf.reachable() & ~vf.target
    return float(np.abs(best[mask] - vf.value[mask]).max(initial=0.0))


def extract_path(vf: ValueField, origin: tuple[int, int]) -> StaircasePath:
    """Greedy descent along the stored policy from origin to the target set."""
    i, j = origin
    if not (0 <= i < vf.grid.nx and 0 <= j < vf.grid.ny):
        raise PreconditionError(f"origin {origin} outside the grid")
    if not np.isfinite(vf.value[i, j]):
        raise PreconditionError(f"origin {origin} cannot reach the target set")
    cells = [(i, j)]
    while vf.policy[i, j] != kernels.AT_TARGET:
        move = vf.policy[i, j]
        if move == kernels.MOVE_EAST:
            i += 1
        elif move == kernels.MOVE_SOUTH:
            j += 1
        else:  # pragma: no cover - reachability guaranteed above
            raise PreconditionError(f"policy dead end at ({i}, {j})")
        cells.append((i, j))
    return StaircasePath(np.asarray(cells),
                         meta={"tie_break": vf.tie_break, "ties": vf.tie_count,
                               "value": float(vf.value[origin[0], origin[1]])})


def all_or_nothing(vf: ValueField, rho: ScalarField) -> FlowField:
    """Load every source cell's rate (positive part of rho times cell area)
    along its greedy optimal path; targets absorb what arrives.

    The result satisfies div T = rho' where rho' matches rho at source cells
    and carries the absorbed rate at target cells (equal to rho there
    whenever each class drains to a single sink).
    """
    if rho.grid.shape != vf.grid.shape:
        raise ValidationError("density grid does not match value field")
    inject = np.clip(rho.values, 0.0, None) * vf.grid.cell_area
    bad = (inject > 0) & ~vf.reachable()
    if bad.any():
        cells = [tuple(map(int, c)) for c in np.argwhere(bad)[:8]]
        raise PreconditionError(f"source cells cannot reach any target: {cells}")
    t1, t2, _absorbed = kernels.load_greedy_flows(vf.policy, inject, vf.grid.h1, vf.grid.h2)
    return FlowField(vf.grid, t1, t2)


def aon_loaded_cost(vf: ValueField, rho: ScalarField) -> float:
    """Demand-weighted value sum: the exact transport cost of the
    all-or-nothing loading under the edge costs that produced vf."""
    inject = np.clip(rho.values, 0.0, None) * vf.grid.cell_area
    mask = inject > 0
    return float(np.sum(inject[mask] * vf.value[mask]))
