"""Per-direction transport cost models.

Three families cover the models in use:

* CongestionIndependent: fixed per-packet costs c1(x), c2(x) (cost per
  bit-meter), insensitive to flow.
* Monomial: per-packet cost k_i(x) * T_i^beta. The direction-i transport
  cost density is then k_i T_i^(beta+1), its marginal (beta+1) k_i T_i^beta,
  and the congestion-game potential k_i T_i^(beta+1) / (beta+1).
* Affine: per-packet cost k_i T_i / 2 + h_i. The factor 1/2 makes the
  marginal exactly k_i T_i + h_i, so the first-order conditions of the
  global problem stay linear in T; the potential integral picks up a 1/4.

The potential psi(x, T) = sum_i integral_0^{T_i} c_i(x, s) ds turns the
user-equilibrium conditions into the first-order conditions of a plain
convex program: dpsi/dT_i = c_i is the defining identity, checked in the
test suite by finite differences.

Cost parameters are cell fields (constants broadcast); where a solver needs
a parameter on a face it takes the mean of the two adjacent cells.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DomainError, PreconditionError, ValidationError
from .grid import Grid, ScalarField

_K_FLOOR = 1e-12


def cost_from_capacity_scaling(p: float, k: float, magnitude) -> float | np.ndarray:
    """Node density k * m^(1/p) needed to carry flow magnitude m when the
    deployed protocol offers transport capacity growing like density^p
    (square-root capacity, p = 1/2, gives the quadratic cost)."""
    if p <= 0:
        raise PreconditionError(f"capacity exponent must be positive, got {p}")
    if k <= 0:
        raise PreconditionError(f"scale must be positive, got {k}")
    m = np.asarray(magnitude, dtype=np.float64)
    if (m < 0).any():
        raise DomainError("flow magnitude must be nonnegative")
    out = k * m ** (1.0 / p)
    return float(out) if out.ndim == 0 else out


def _as_field(grid: Grid, value) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return ScalarField.constant(grid, float(arr))
    return ScalarField(grid, arr)


def _check_nonneg_t(t1, t2) -> tuple[np.ndarray, np.ndarray]:
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    if (t1 < 0).any() or (t2 < 0).any():
        raise DomainError("flows must be nonnegative")
    return t1, t2


class CostModel:
    """Common interface: per-packet, transport, marginal and potential costs.

    The scalar entry points evaluate at one cell; the *_arrays variants take
    arbitrary aligned arrays of parameters and flows and are what the
    solvers call on face-averaged data.
    """

    kind: str
    grid: Grid

    # -- scalar API -------------------------------------------------------
    def packet_cost(self, cell: tuple[int, int], t1: float, t2: float) -> tuple[float, float]:
        g1, g2 = self.packet_cost_arrays(*self._cell_params(cell), *_check_nonneg_t(t1, t2))
        return float(g1), float(g2)

    def marginal_cost(self, cell: tuple[int, int], t1: float, t2: float) -> tuple[float, float]:
        m1, m2 = self.marginal_cost_arrays(*self._cell_params(cell), *_check_nonneg_t(t1, t2))
        return float(m1), float(m2)

    def local_transport_cost(self, cell: tuple[int, int], t1: float, t2: float) -> float:
        t1, t2 = _check_nonneg_t(t1, t2)
        g1, g2 = self.packet_cost_arrays(*self._cell_params(cell), t1, t2)
        return float(g1 * t1 + g2 * t2)

    def beckmann_potential(self, cell: tuple[int, int], t1: float, t2: float) -> float:
        p1, p2 = self.potential_arrays(*self._cell_params(cell), *_check_nonneg_t(t1, t2))
        return float(p1 + p2)

    # -- array API, implemented by each family ----------------------------
    def _cell_params(self, cell):
        raise NotImplementedError

    def face_params(self):
        """Model parameters averaged onto the faces they act on: direction-1
        parameters onto east faces (shape (nx-1, ny)), direction-2 onto south
        faces (shape (nx, ny-1)). The returned tuple splats straight into the
        *_arrays methods together with face flow arrays of those shapes."""
        raise NotImplementedError

    def packet_cost_arrays(self, *args):
        raise NotImplementedError

    def marginal_cost_arrays(self, *args):
        raise NotImplementedError

    def potential_arrays(self, *args):
        raise NotImplementedError

    @property
    def convex_for_assignment(self) -> bool:
        return True

    @property
    def congestion_dependent(self) -> bool:
        return True


def east_face_mean(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values[:-1, :] + values[1:, :])


def south_face_mean(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values[:, :-1] + values[:, 1:])


class CongestionIndependent(CostModel):
    kind = "independent"

    def __init__(self, grid: Grid, c1, c2):
        self.grid = grid
        self.c1 = _as_field(grid, c1)
        self.c2 = _as_field(grid, c2)
        if (self.c1.values < 0).any() or (self.c2.values < 0).any():
            raise ValidationError("congestion-independent costs must be nonnegative")

    def _cell_params(self, cell):
        i, j = cell
        return (self.c1.values[i, j], self.c2.values[i, j])

    def face_params(self):
        return (east_face_mean(self.c1.values), south_face_mean(self.c2.values))

    def packet_cost_arrays(self, c1, c2, t1, t2):
        return c1 * np.ones_like(t1), c2 * np.ones_like(t2)

    marginal_cost_arrays = packet_cost_arrays

    def potential_arrays(self, c1, c2, t1, t2):
        return c1 * t1, c2 * t2

    @property
    def congestion_dependent(self) -> bool:
        return False


class Monomial(CostModel):
    kind = "monomial"

    def __init__(self, grid: Grid, k1, k2, beta: float):
        self.grid = grid
        self.k1 = _as_field(grid, k1)
        self.k2 = _as_field(grid, k2)
        if beta <= 0:
            raise ValidationError(f"monomial exponent must be positive, got beta={beta}")
        _require_positive_k(self.k1, self.k2)
        self.beta = float(beta)
        if self.beta < 1.0:
            warnings.warn(
                f"monomial beta={beta} < 1: marginal cost vanishes at zero flow "
                "and assignment-solver convexity guarantees do not apply",
                stacklevel=2)

    def _cell_params(self, cell):
        i, j = cell
        return (self.k1.values[i, j], self.k2.values[i, j])

    def face_params(self):
        return (east_face_mean(self.k1.values), south_face_mean(self.k2.values))

    def packet_cost_arrays(self, k1, k2, t1, t2):
        return k1 * t1 ** self.beta, k2 * t2 ** self.beta

    def marginal_cost_arrays(self, k1, k2, t1, t2):
        f = self.beta + 1.0
        return f * k1 * t1 ** self.beta, f * k2 * t2 ** self.beta

    def potential_arrays(self, k1, k2, t1, t2):
        f = self.beta + 1.0
        return k1 * t1 ** f / f, k2 * t2 ** f / f

    @property
    def convex_for_assignment(self) -> bool:
        return self.beta >= 1.0


class Affine(CostModel):
    kind = "affine"

    def __init__(self, grid: Grid, k1, k2, h1, h2):
        self.grid = grid
        self.k1 = _as_field(grid, k1)
        self.k2 = _as_field(grid, k2)
        self.h1 = _as_field(grid, h1)
        self.h2 = _as_field(grid, h2)
        _require_positive_k(self.k1, self.k2)
        if (self.h1.values < 0).any() or (self.h2.values < 0).any():
            raise ValidationError("affine offsets h must be nonnegative")

    def _cell_params(self, cell):
        i, j = cell
        return (self.k1.values[i, j], self.k2.values[i, j],
                self.h1.values[i, j], self.h2.values[i, j])

    def face_params(self):
        return (east_face_mean(self.k1.values), south_face_mean(self.k2.values),
                east_face_mean(self.h1.values), south_face_mean(self.h2.values))

    def packet_cost_arrays(self, k1, k2, h1, h2, t1, t2):
        return 0.5 * k1 * t1 + h1, 0.5 * k2 * t2 + h2

    def marginal_cost_arrays(self, k1, k2, h1, h2, t1, t2):
        return k1 * t1 + h1, k2 * t2 + h2

    def potential_arrays(self, k1, k2, h1, h2, t1, t2):
        return (0.25 * k1 * t1 * t1 + h1 * t1,
                0.25 * k2 * t2 * t2 + h2 * t2)


def _require_positive_k(k1: ScalarField, k2: ScalarField) -> None:
    lo = min(float(k1.values.min()), float(k2.values.min()))
    if lo < _K_FLOOR:
        raise ValidationError(
            f"congestion slopes k must stay above {_K_FLOOR:g}, found {lo:g}")
