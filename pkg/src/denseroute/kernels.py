"""Hot grid kernels, pure-numpy reference implementations.

Cells are indexed [i, j] with i along x1 (west to east) and j along x2 (north
to south); the only admissible moves are east (i+1) and south (j+1), which
makes the move graph a DAG ordered by anti-diagonals i+j.

Kernels here are the numpy fallback; :mod:`denseroute._kernels_numba` holds
njit twins with identical per-cell arithmetic. `get_kernels()` dispatches on
the active backend.

Policy codes produced by ``value_sweep``:
    MOVE_EAST / MOVE_SOUTH  cheapest continuation (ties broken east-first)
    AT_TARGET               cell belongs to the target set, value 0
    UNREACHABLE             no monotone path to a target; value +inf
"""

from __future__ import annotations

import numpy as np

from .backend import active_backend

MOVE_EAST = np.int8(0)
MOVE_SOUTH = np.int8(1)
AT_TARGET = np.int8(2)
UNREACHABLE = np.int8(3)


def value_sweep_numpy(east_cost: np.ndarray, south_cost: np.ndarray,
                      target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact DP solve of V = min(east_cost + V_E, south_cost + V_S), V=0 on target.

    east_cost has shape (nx-1, ny): cost of the move (i,j)->(i+1,j).
    south_cost has shape (nx, ny-1): cost of (i,j)->(i,j+1).
    Processes anti-diagonals i+j in decreasing order; cells on one diagonal
    are independent, so the vectorized update matches the serial sweep bitwise.
    """
    nx, ny = target.shape
    value = np.full((nx, ny), np.inf)
    policy = np.full((nx, ny), UNREACHABLE, dtype=np.int8)
    value[target] = 0.0
    policy[target] = AT_TARGET
    for d in range(nx + ny - 2, -1, -1):
        ii = np.arange(max(0, d - ny + 1), min(nx - 1, d) + 1)
        jj = d - ii
        east_total = np.full(ii.shape, np.inf)
        has_e = ii < nx - 1
        east_total[has_e] = east_cost[ii[has_e], jj[has_e]] + value[ii[has_e] + 1, jj[has_e]]
        south_total = np.full(ii.shape, np.inf)
        has_s = jj < ny - 1
        south_total[has_s] = south_cost[ii[has_s], jj[has_s]] + value[ii[has_s], jj[has_s] + 1]
        go_east = east_total <= south_total
        best = np.where(go_east, east_total, south_total)
        pol = np.where(go_east, MOVE_EAST, MOVE_SOUTH).astype(np.int8)
        pol[~np.isfinite(best)] = UNREACHABLE
        keep = ~target[ii, jj]
        value[ii[keep], jj[keep]] = best[keep]
        policy[ii[keep], jj[keep]] = pol[keep]
    return value, policy


def load_greedy_flows_numpy(policy: np.ndarray, inject: np.ndarray,
                            h1: float, h2: float
                            ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Push injected cell rates through the policy DAG, accumulating face fluxes.

    Every cell forwards its accumulated rate (own injection plus inflow) along
    its policy direction; target cells absorb. Equivalent to routing each
    source cell's rate along its greedy optimal path and superposing. Face
    fluxes are rate per unit face length (east faces have length h2, south
    faces h1). Returns (t1, t2, absorbed).
    """
    nx, ny = policy.shape
    acc = inject.astype(np.float64).copy()
    t1 = np.zeros((nx - 1, ny))
    t2 = np.zeros((nx, ny - 1))
    absorbed = np.zeros((nx, ny))
    for d in range(0, nx + ny - 1):
        ii = np.arange(max(0, d - ny + 1), min(nx - 1, d) + 1)
        jj = d - ii
        rates = acc[ii, jj]
        pol = policy[ii, jj]
        at = pol == AT_TARGET
        absorbed[ii[at], jj[at]] += rates[at]
        east = (pol == MOVE_EAST) & (rates != 0.0)
        t1[ii[east], jj[east]] += rates[east] / h2
        acc[ii[east] + 1, jj[east]] += rates[east]
        south = (pol == MOVE_SOUTH) & (rates != 0.0)
        t2[ii[south], jj[south]] += rates[south] / h1
        acc[ii[south], jj[south] + 1] += rates[south]
    return t1, t2, absorbed


def apply_flux_laplacian_numpy(a1: np.ndarray, a2: np.ndarray, x: np.ndarray,
                               h1: float, h2: float) -> np.ndarray:
    """y = -div(a grad x) with zero-flux outer boundary.

    a1 (nx-1, ny) and a2 (nx, ny-1) are face coefficients. Symmetric positive
    semi-definite for a > 0; nullspace is the constants.
    """
    h1sq = h1 * h1
    h2sq = h2 * h2
    y = np.zeros_like(x)
    d1 = a1 * (x[:-1, :] - x[1:, :])
    y[:-1, :] += d1 / h1sq
    y[1:, :] += (-d1) / h1sq
    d2 = a2 * (x[:, :-1] - x[:, 1:])
    y[:, :-1] += d2 / h2sq
    y[:, 1:] += (-d2) / h2sq
    return y


def _cumulative_rows(c: np.ndarray, h: float) -> np.ndarray:
    # cum[k, j] = integral of the piecewise-constant column profile c[:, j]
    # from 0 to k*h; built by an explicit sequential loop so both backends
    # produce the same association order.
    n = c.shape[0]
    cum = np.empty((n + 1,) + c.shape[1:])
    cum[0] = 0.0
    for k in range(n):
        cum[k + 1] = cum[k] + c[k] * h
    return cum


def lattice_edge_costs_numpy(c1: np.ndarray, c2: np.ndarray, h1: float, h2: float,
                             node_x: np.ndarray, node_y: np.ndarray
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Exact integrals of piecewise-constant cost fields along lattice edges.

    Nodes live at (node_x[p], node_y[q]). East edge (p,q)->(p+1,q) integrates
    c1 along its row; south edge (p,q)->(p,q+1) integrates c2 along its
    column. Coordinates exactly on a cell boundary resolve to the higher cell
    index (clipped at the last cell).
    """
    nx, ny = c1.shape
    col = np.minimum((node_x / h1).astype(np.int64), nx - 1)
    row = np.minimum((node_y / h2).astype(np.int64), ny - 1)

    cum1 = _cumulative_rows(c1, h1)          # (nx+1, ny)
    # f1[p, j] = integral of c1[:, j] over [0, node_x[p]]
    f1 = cum1[col, :] + c1[col, :] * (node_x - col * h1)[:, None]
    east = (f1[1:, :] - f1[:-1, :])[:, row]  # (d-1, d)

    cum2 = _cumulative_rows(c2.T, h2)        # (ny+1, nx)
    f2 = cum2[row, :] + c2.T[row, :] * (node_y - row * h2)[:, None]
    south = (f2[1:, :] - f2[:-1, :])[:, col].T  # (d, d-1)
    return east, south


_NUMPY_KERNELS = {
    "value_sweep": value_sweep_numpy,
    "load_greedy_flows": load_greedy_flows_numpy,
    "apply_flux_laplacian": apply_flux_laplacian_numpy,
    "lattice_edge_costs": lattice_edge_costs_numpy,
}


def get_kernels(backend: str | None = None) -> dict:
    """Kernel table for the requested backend (default: active backend)."""
    name = backend or active_backend()
    if name == "numpy":
        return _NUMPY_KERNELS
    from . import _kernels_numba
    return _kernels_numba.KERNELS


def value_sweep(east_cost, south_cost, target):
    return get_kernels()["value_sweep"](
        np.ascontiguousarray(east_cost, dtype=np.float64),
        np.ascontiguousarray(south_cost, dtype=np.float64),
        np.ascontiguousarray(target, dtype=np.bool_),
    )


def load_greedy_flows(policy, inject, h1, h2):
    return get_kernels()["load_greedy_flows"](
        np.ascontiguousarray(policy, dtype=np.int8),
        np.ascontiguousarray(inject, dtype=np.float64),
        float(h1), float(h2),
    )


def apply_flux_laplacian(a1, a2, x, h1, h2):
    return get_kernels()["apply_flux_laplacian"](
        np.ascontiguousarray(a1, dtype=np.float64),
        np.ascontiguousarray(a2, dtype=np.float64),
        np.ascontiguousarray(x, dtype=np.float64),
        float(h1), float(h2),
    )


def lattice_edge_costs(c1, c2, h1, h2, node_x, node_y):
    return get_kernels()["lattice_edge_costs"](
        np.ascontiguousarray(c1, dtype=np.float64),
        np.ascontiguousarray(c2, dtype=np.float64),
        float(h1), float(h2),
        np.ascontiguousarray(node_x, dtype=np.float64),
        np.ascontiguousarray(node_y, dtype=np.float64),
    )
