"""Numba twins of the grid kernels.

Each kernel repeats the arithmetic of its numpy reference in the same
association order, cell by cell, so results match the fallback bitwise
(edge integrals: to rounding). Compiled lazily with on-disk caching.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MOVE_EAST = 0
MOVE_SOUTH = 1
AT_TARGET = 2
UNREACHABLE = 3


@njit(cache=True)
def value_sweep_nb(east_cost, south_cost, target):
    nx, ny = target.shape
    value = np.full((nx, ny), np.inf)
    policy = np.full((nx, ny), UNREACHABLE, dtype=np.int8)
    for i in range(nx - 1, -1, -1):
        for j in range(ny - 1, -1, -1):
            if target[i, j]:
                value[i, j] = 0.0
                policy[i, j] = AT_TARGET
                continue
            east_total = np.inf
            if i < nx - 1:
                east_total = east_cost[i, j] + value[i + 1, j]
            south_total = np.inf
            if j < ny - 1:
                south_total = south_cost[i, j] + value[i, j + 1]
            if east_total <= south_total:
                value[i, j] = east_total
                policy[i, j] = MOVE_EAST
            else:
                value[i, j] = south_total
                policy[i, j] = MOVE_SOUTH
            if not np.isfinite(value[i, j]):
                policy[i, j] = UNREACHABLE
    return value, policy


@njit(cache=True)
def load_greedy_flows_nb(policy, inject, h1, h2):
    nx, ny = policy.shape
    acc = inject.copy()
    t1 = np.zeros((nx - 1, ny))
    t2 = np.zeros((nx, ny - 1))
    absorbed = np.zeros((nx, ny))
    for d in range(0, nx + ny - 1):
        i0 = max(0, d - ny + 1)
        i1 = min(nx - 1, d)
        for i in range(i0, i1 + 1):
            j = d - i
            rate = acc[i, j]
            pol = policy[i, j]
            if pol == AT_TARGET:
                absorbed[i, j] += rate
            elif rate != 0.0:
                if pol == MOVE_EAST:
                    t1[i, j] += rate / h2
                    acc[i + 1, j] += rate
                elif pol == MOVE_SOUTH:
                    t2[i, j] += rate / h1
                    acc[i, j + 1] += rate
    return t1, t2, absorbed


@njit(cache=True)
def apply_flux_laplacian_nb(a1, a2, x, h1, h2):
    nx, ny = x.shape
    h1sq = h1 * h1
    h2sq = h2 * h2
    y = np.zeros((nx, ny))
    for i in range(nx):
        for j in range(ny):
            acc = 0.0
            if i < nx - 1:
                acc += a1[i, j] * (x[i, j] - x[i + 1, j]) / h1sq
            if i > 0:
                acc += a1[i - 1, j] * (x[i, j] - x[i - 1, j]) / h1sq
            if j < ny - 1:
                acc += a2[i, j] * (x[i, j] - x[i, j + 1]) / h2sq
            if j > 0:
                acc += a2[i, j - 1] * (x[i, j] - x[i, j - 1]) / h2sq
            y[i, j] = acc
    return y


@njit(cache=True)
def lattice_edge_costs_nb(c1, c2, h1, h2, node_x, node_y):
    nx, ny = c1.shape
    d = node_x.shape[0]

    cum1 = np.empty((nx + 1, ny))
    for j in range(ny):
        cum1[0, j] = 0.0
    for k in range(nx):
        for j in range(ny):
            cum1[k + 1, j] = cum1[k, j] + c1[k, j] * h1

    cum2 = np.empty((ny + 1, nx))
    for i in range(nx):
        cum2[0, i] = 0.0
    for m in range(ny):
        for i in range(nx):
            cum2[m + 1, i] = cum2[m, i] + c2[i, m] * h2

    col = np.empty(d, dtype=np.int64)
    row = np.empty(d, dtype=np.int64)
    for p in range(d):
        col[p] = min(np.int64(node_x[p] / h1), nx - 1)
        row[p] = min(np.int64(node_y[p] / h2), ny - 1)

    east = np.empty((d - 1, d))
    for q in range(d):
        j = row[q]
        for p in range(d - 1):
            ka = col[p]
            kb = col[p + 1]
            fa = cum1[ka, j] + c1[ka, j] * (node_x[p] - ka * h1)
            fb = cum1[kb, j] + c1[kb, j] * (node_x[p + 1] - kb * h1)
            east[p, q] = fb - fa

    south = np.empty((d, d - 1))
    for p in range(d):
        i = col[p]
        for q in range(d - 1):
            ma = row[q]
            mb = row[q + 1]
            fa = cum2[ma, i] + c2[i, ma] * (node_y[q] - ma * h2)
            fb = cum2[mb, i] + c2[i, mb] * (node_y[q + 1] - mb * h2)
            south[p, q] = fb - fa
    return east, south


KERNELS = {
    "value_sweep": value_sweep_nb,
    "load_greedy_flows": load_greedy_flows_nb,
    "apply_flux_laplacian": apply_flux_laplacian_nb,
    "lattice_edge_costs": lattice_edge_costs_nb,
}
