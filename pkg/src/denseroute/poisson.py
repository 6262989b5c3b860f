"""Conjugate-gradient solves of the flux-form elliptic operator.

The operator is A x = -div(a grad x) built from face coefficients with the
same zero-flux outer boundary as every flow field, so A is symmetric
positive semi-definite with the constants as nullspace. Right-hand sides
produced by balanced sources are orthogonal to that nullspace, and CG
started at zero stays in range(A); the residual is re-centered every
iteration to keep rounding from drifting into the nullspace. A Dirichlet
variant pins a cell mask to zero (used for multiplier recovery), which makes
the restricted operator positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .grid import Grid
from .kernels import apply_flux_laplacian


@dataclass
class CGInfo:
    iterations: int
    residual: float


def _project_constants(x: np.ndarray) -> None:
    x -= x.mean()


def solve_flux_poisson(a1: np.ndarray, a2: np.ndarray, rhs: np.ndarray,
                       grid: Grid, rtol: float = 1e-10,
                       max_iter: int | None = None,
                       dirichlet_mask: np.ndarray | None = None
                       ) -> tuple[np.ndarray, CGInfo]:
    """Solve A x = rhs by CG. Without a Dirichlet mask the consistent
    singular system is solved in the zero-mean subspace; with one, masked
    cells are pinned to zero. Returns (x, info); raises NumericalError if the
    residual does not reach rtol * ||rhs|| within the iteration cap."""
    n = grid.nx * grid.ny
    cap = max_iter if max_iter is not None else max(20 * n, 200)
    free = None if dirichlet_mask is None else ~np.asarray(dirichlet_mask, dtype=bool)

    def op(v: np.ndarray) -> np.ndarray:
        if free is not None:
            v = np.where(free, v, 0.0)
        y = apply_flux_laplacian(a1, a2, v, grid.h1, grid.h2)
        if free is not None:
            y = np.where(free, y, v)
        return y

    b = np.asarray(rhs, dtype=np.float64).copy()
    if free is None:
        _project_constants(b)
    else:
        b = np.where(free, b, 0.0)
    bnorm = float(np.sqrt(np.sum(b * b)))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, CGInfo(iterations=0, residual=0.0)
    tol = rtol * bnorm

    r = b.copy()
    p = r.copy()
    rs = float(np.sum(r * r))
    it = 0
    while np.sqrt(rs) > tol:
        if it >= cap:
            raise NumericalError(
                f"CG stalled: residual {np.sqrt(rs):.3e} > {tol:.3e} after {cap} iterations")
        ap = op(p)
        alpha = rs / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        if free is None:
            _project_constants(r)
        rs_new = float(np.sum(r * r))
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    if free is None:
        _project_constants(x)
    return x, CGInfo(iterations=it, residual=float(np.sqrt(rs)))
