"""Separable stream-function reference solutions for linear-cost equilibria.

With linear per-packet costs c_i = k_i T_i + h_i (constants) and no interior
sources, an equilibrium with everywhere-positive flows equalizes path costs,
which forces k1 dT1/dx2 = k2 dT2/dx1. Writing the divergence-free flow
through a stream function phi (T1 = dphi/dx2, T2 = -dphi/dx1) turns that
into the anisotropic Laplace equation

    k1 d2phi/dx2^2 + k2 d2phi/dx1^2 = 0,

whose separated solutions on the rectangle are products of cosh/sinh in
K1 x1 and cos/sin in K2 x2 with K_i = sqrt(k_i), one product per separation
constant s, plus the s -> 0 limit: an affine term representing uniform
background flow. Truncated sums of such modes are evaluable anywhere with
closed-form derivatives, so they serve as an analytic oracle: the PDE,
conservation and equalized-cost identities hold exactly, and sampled
residuals must vanish at second order under grid refinement.

`stream_from_flows` inverts the construction for a numeric flow field
(path-independent exactly when the flow is divergence-free), and
`fit_stream_modes` least-squares-projects such a stream surface onto a mode
family, which is how numeric equilibria are compared against this family.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DomainError, ValidationError
from .grid import FlowField, Grid


@dataclass(frozen=True)
class Mode:
    """phi(x1,x2) = [A cosh(s K1 x1) + B sinh(s K1 x1)]
                  * [C cos(s K2 x2) + D sin(s K2 x2)]"""

    s: float
    A: float = 0.0
    B: float = 0.0
    C: float = 0.0
    D: float = 0.0


@dataclass
class SeparableSolution:
    """Truncated mode sum plus an explicit affine term on [0,a] x [0,b]."""

    a: float
    b: float
    k1: float
    k2: float
    modes: list[Mode] = dc_field(default_factory=list)
    linear: tuple[float, float] = (0.0, 0.0)
    const: float = 0.0

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValidationError("congestion slopes k1, k2 must be positive")

    @property
    def K1(self) -> float:
        return float(np.sqrt(self.k1))

    @property
    def K2(self) -> float:
        return float(np.sqrt(self.k2))

    def _check_domain(self, x1, x2) -> None:
        x1 = np.asarray(x1)
        x2 = np.asarray(x2)
        eps = 1e-12 * max(self.a, self.b)
        if (x1.min() < -eps or x1.max() > self.a + eps
                or x2.min() < -eps or x2.max() > self.b + eps):
            raise DomainError("evaluation point outside the rectangle")

    def phi(self, x1, x2):
        self._check_domain(x1, x2)
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        out = self.const + self.linear[0] * x1 + self.linear[1] * x2
        for m in self.modes:
            u = m.s * self.K1 * x1
            v = m.s * self.K2 * x2
            out = out + (m.A * np.cosh(u) + m.B * np.sinh(u)) \
                      * (m.C * np.cos(v) + m.D * np.sin(v))
        return out

    def grad(self, x1, x2):
        """(dphi/dx1, dphi/dx2), closed form."""
        self._check_domain(x1, x2)
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        d1 = np.full(np.broadcast(x1, x2).shape, self.linear[0])
        d2 = np.full(np.broadcast(x1, x2).shape, self.linear[1])
        for m in self.modes:
            u = m.s * self.K1 * x1
            v = m.s * self.K2 * x2
            f1 = m.A * np.cosh(u) + m.B * np.sinh(u)
            df1 = m.s * self.K1 * (m.A * np.sinh(u) + m.B * np.cosh(u))
            f2 = m.C * np.cos(v) + m.D * np.sin(v)
            df2 = m.s * self.K2 * (-m.C * np.sin(v) + m.D * np.cos(v))
            d1 = d1 + df1 * f2
            d2 = d2 + f1 * df2
        return d1, d2

    def flow_at(self, x1, x2):
        """(T1, T2) = (dphi/dx2, -dphi/dx1)."""
        d1, d2 = self.grad(x1, x2)
        return d2, -d1


def stream_function(solution: SeparableSolution, x) -> tuple[float, float, float]:
    """phi and its gradient at one point: (phi, dphi/dx1, dphi/dx2)."""
    x1, x2 = float(x[0]), float(x[1])
    value = float(solution.phi(x1, x2))
    d1, d2 = solution.grad(x1, x2)
    return value, float(d1), float(d2)


@dataclass
class FlowSample:
    flow: FlowField
    min_t1: float
    min_t2: float
    negative_faces: int


def flows_from_stream(solution: SeparableSolution, grid: Grid,
                      neg_tol: float = 1e-12) -> FlowSample:
    """Sample the analytic flow at face midpoints.

    Negative samples are reported, not clamped: they mean the solution is
    not a valid directed flow on this grid. The sampled field's divergence
    is the centered second-difference of an exactly divergence-free flow, so
    it vanishes at O(h^2) under refinement.
    """
    if abs(grid.a - solution.a) > 1e-12 * solution.a or abs(grid.b - solution.b) > 1e-12 * solution.b:
        raise ValidationError("grid extents do not match the solution rectangle")
    xe = np.arange(1, grid.nx)[:, None] * grid.h1          # east-face abscissae
    ye = (np.arange(grid.ny)[None, :] + 0.5) * grid.h2
    t1, _ = solution.flow_at(np.broadcast_to(xe, (grid.nx - 1, grid.ny)),
                             np.broadcast_to(ye, (grid.nx - 1, grid.ny)))
    xs = (np.arange(grid.nx)[:, None] + 0.5) * grid.h1
    ys = np.arange(1, grid.ny)[None, :] * grid.h2          # south-face ordinates
    _, t2 = solution.flow_at(np.broadcast_to(xs, (grid.nx, grid.ny - 1)),
                             np.broadcast_to(ys, (grid.nx, grid.ny - 1)))
    scale = max(float(np.abs(t1).max()), float(np.abs(t2).max()), 1.0)
    neg = int(np.count_nonzero(t1 < -neg_tol * scale)
              + np.count_nonzero(t2 < -neg_tol * scale))
    flow = FlowField(grid, t1, t2, validate=neg == 0)
    return FlowSample(flow=flow, min_t1=float(t1.min()), min_t2=float(t2.min()),
                      negative_faces=neg)


def equalized_cost_residual(flow: FlowField, k1: float, k2: float
                            ) -> tuple[np.ndarray, float]:
    """Residual k1 dT1/dx2 - k2 dT2/dx1 on interior cell corners.

    Zero exactly for an equalized-cost (equilibrium) flow with linear costs;
    for face-sampled analytic flows the sampled residual decays at O(h^2).
    Returns (residual array of shape (nx-1, ny-1), max norm).
    """
    g = flow.grid
    d1 = (flow.t1[:, 1:] - flow.t1[:, :-1]) / g.h2
    d2 = (flow.t2[1:, :] - flow.t2[:-1, :]) / g.h1
    res = k1 * d1 - k2 * d2
    return res, float(np.abs(res).max())


def stream_from_flows(flow: FlowField) -> tuple[np.ndarray, float]:
    """Integrate face flows into a stream surface on interior cell corners.

    Node (i, j), i in 1..nx-1, j in 1..ny-1, sits at (i h1, j h2); array
    index (i-1, j-1). The integral is path-independent exactly when the flow
    is divergence-free in the interior; the returned closure error is the
    max disagreement between row-first and column-first integration.
    """
    g = flow.grid
    t1, t2 = flow.t1, flow.t2
    ni, nj = g.nx - 1, g.ny - 1

    p_row = np.zeros((ni, nj))
    p_row[:, 0] = -g.h1 * np.cumsum(np.concatenate([[0.0], t2[1:, 0]]))[:ni]
    p_row[:, 1:] = p_row[:, :1] + g.h2 * np.cumsum(t1[:, 1:nj], axis=1)

    p_col = np.zeros((ni, nj))
    p_col[0, :] = g.h2 * np.cumsum(np.concatenate([[0.0], t1[0, 1:nj]]))[:nj]
    p_col[1:, :] = p_col[:1, :] - g.h1 * np.cumsum(t2[1:, :nj], axis=0)[: ni - 1, :]

    closure = float(np.abs(p_row - p_col).max())
    return p_row, closure


def fit_stream_modes(phi_nodes: np.ndarray, grid: Grid, k1: float, k2: float,
                     s_values) -> tuple[SeparableSolution, float]:
    """Least-squares projection of a stream surface (on interior corners)
    onto the mode family spanned by s_values plus constant and affine terms.
    Returns the fitted solution and the relative L2 misfit."""
    ni, nj = grid.nx - 1, grid.ny - 1
    if phi_nodes.shape != (ni, nj):
        raise ValidationError(f"expected interior-corner array {(ni, nj)}, got {phi_nodes.shape}")
    x1 = (np.arange(1, grid.nx) * grid.h1)[:, None] * np.ones((1, nj))
    x2 = np.ones((ni, 1)) * (np.arange(1, grid.ny) * grid.h2)[None, :]
    K1, K2 = np.sqrt(k1), np.sqrt(k2)
    cols = [np.ones(ni * nj), x1.ravel(), x2.ravel()]
    combos = []
    for s in s_values:
        u = s * K1 * x1
        v = s * K2 * x2
        for f1 in (np.cosh(u), np.sinh(u)):
            for f2 in (np.cos(v), np.sin(v)):
                cols.append((f1 * f2).ravel())
        combos.append(s)
    basis = np.column_stack(cols)
    target = phi_nodes.ravel()
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    fitted = basis @ coef
    denom = float(np.linalg.norm(target - target.mean()))
    misfit = float(np.linalg.norm(target - fitted)) / max(denom, 1e-300)

    # The four basis products per s (cosh*cos, cosh*sin, sinh*cos, sinh*sin)
    # regroup into two modes: cosh*(...) and sinh*(...).
    modes = []
    for idx, s in enumerate(combos):
        c = coef[3 + 4 * idx: 3 + 4 * (idx + 1)]
        modes.append(Mode(s=s, A=1.0, B=0.0, C=float(c[0]), D=float(c[1])))
        modes.append(Mode(s=s, A=0.0, B=1.0, C=float(c[2]), D=float(c[3])))
    solution = SeparableSolution(a=grid.a, b=grid.b, k1=k1, k2=k2, modes=modes,
                                 linear=(float(coef[1]), float(coef[2])),
                                 const=float(coef[0]))
    return solution, misfit


def reference_solutions(a: float = 1.0, b: float = 1.0,
                        k1: float = 1.0, k2: float = 2.0) -> list[SeparableSolution]:
    """The shipped analytic fixtures exercised by the refinement tests."""
    return [
        SeparableSolution(a=a, b=b, k1=k1, k2=k2,
                          modes=[Mode(s=1.0, A=1.0, D=1.0)]),
        SeparableSolution(a=a, b=b, k1=k1, k2=k2, linear=(-1.5, 0.25)),
        SeparableSolution(a=a, b=b, k1=k1, k2=k2,
                          modes=[Mode(s=0.8, A=0.7, B=0.3, C=0.4, D=1.1),
                                 Mode(s=1.7, A=-0.2, B=0.5, C=0.9, D=-0.3)],
                          linear=(0.6, -0.4), const=0.2),
    ]
