"""Staggered rectangular grid, cell fields, face flows, divergence, CSV I/O.

Conventions, used everywhere in the package:

* The domain is the rectangle [0, a] x [0, b]. Coordinate x1 grows west to
  east, x2 grows north to south. It splits into nx * ny cells of size
  h1 x h2; cell (i, j) has center ((i + 1/2) h1, (j + 1/2) h2).
* Scalars (densities rho, values V, multipliers zeta, curl gaps U) live at
  cell centers. Directed flows live on interior faces: t1[i, j] >= 0 is the
  eastward flux (bps/m) through the vertical face between cells (i, j) and
  (i+1, j); t2[i, j] >= 0 is the southward flux through the horizontal face
  between (i, j) and (i, j+1).
* Outer boundary faces are not stored and carry zero flux. All sources and
  sinks are interior cell densities, so the discrete divergence telescopes
  to an exactly conservative operator: sum(div * cell area) == 0 for every
  flow field.

The named boundary edges are Gamma1 = south (x2 = b), Gamma2 = east
(x1 = a), Gamma3 = north (x2 = 0), Gamma4 = west (x1 = 0); the monotone
east/south move set reaches Gamma1 and Gamma2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FieldParseError, ValidationError

_FLOW_NEG_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Rectangular cell-centered grid with extents (a, b) and counts (nx, ny)."""

    a: float
    b: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValidationError(f"grid extents must be positive, got a={self.a}, b={self.b}")
        if self.nx < 2 or self.ny < 2:
            raise ValidationError(f"need nx, ny >= 2, got nx={self.nx}, ny={self.ny}")

    @property
    def h1(self) -> float:
        return self.a / self.nx

    @property
    def h2(self) -> float:
        return self.b / self.ny

    @property
    def cell_area(self) -> float:
        return self.h1 * self.h2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (nx, ny) of cell-center coordinates."""
        x1 = (np.arange(self.nx) + 0.5) * self.h1
        x2 = (np.arange(self.ny) + 0.5) * self.h2
        return np.meshgrid(x1, x2, indexing="ij")

    def cell_of(self, x1: float, x2: float) -> tuple[int, int]:
        """Cell containing the point; points on a cell edge go to the higher index."""
        if not (0.0 <= x1 <= self.a and 0.0 <= x2 <= self.b):
            raise DomainError(f"point ({x1}, {x2}) outside [0,{self.a}]x[0,{self.b}]")
        i = min(int(x1 / self.h1), self.nx - 1)
        j = min(int(x2 / self.h2), self.ny - 1)
        return i, j

    def nearest_cell(self, x1: float, x2: float) -> tuple[int, int]:
        """Cell whose center is nearest to the point (ties toward lower index)."""
        if not (0.0 <= x1 <= self.a and 0.0 <= x2 <= self.b):
            raise DomainError(f"point ({x1}, {x2}) outside [0,{self.a}]x[0,{self.b}]")
        i = int(np.clip(round(x1 / self.h1 - 0.5), 0, self.nx - 1))
        j = int(np.clip(round(x2 / self.h2 - 0.5), 0, self.ny - 1))
        return i, j


class ScalarField:
    """One float per cell. Infinities are rejected unless allow_inf is set
    (value fields use +inf as the unreachable sentinel)."""

    def __init__(self, grid: Grid, values: np.ndarray, allow_inf: bool = False):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ValidationError(
                f"field shape {values.shape} does not match grid {grid.shape}")
        if np.isnan(values).any():
            raise ValidationError("field contains NaN")
        if not allow_inf and np.isinf(values).any():
            raise ValidationError("field contains non-finite values")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls.constant(grid, 0.0)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        x1, x2 = grid.cell_centers()
        return cls(grid, np.asarray(fn(x1, x2), dtype=np.float64))

    def __repr__(self):
        return f"ScalarField({self.grid.nx}x{self.grid.ny})"


class FlowField:
    """Nonnegative directed face flows of one traffic class.

    t1 has shape (nx-1, ny) (east faces), t2 has shape (nx, ny-1) (south
    faces), both in bps/m. Construction clips float dust in
    [-1e-12 * scale, 0) to zero and rejects anything more negative;
    validate=False keeps raw values (used to report sign violations of
    recovered flows rather than hide them).
    """

    def __init__(self, grid: Grid, t1: np.ndarray, t2: np.ndarray,
                 cls_index: int = 0, validate: bool = True):
        t1 = np.asarray(t1, dtype=np.float64).copy()
        t2 = np.asarray(t2, dtype=np.float64).copy()
        if t1.shape != (grid.nx - 1, grid.ny) or t2.shape != (grid.nx, grid.ny - 1):
            raise ValidationError(
                f"flow shapes {t1.shape}/{t2.shape} do not match grid {grid.shape}")
        if validate:
            scale = max(float(np.abs(t1).max(initial=0.0)),
                        float(np.abs(t2).max(initial=0.0)), 1.0)
            floor = -_FLOW_NEG_TOL * scale
            if t1.min(initial=0.0) < floor or t2.min(initial=0.0) < floor:
                raise ValidationError(
                    f"negative face flows: min t1={t1.min():.3e}, min t2={t2.min():.3e}")
            np.clip(t1, 0.0, None, out=t1)
            np.clip(t2, 0.0, None, out=t2)
        self.grid = grid
        self.t1 = t1
        self.t2 = t2
        self.cls_index = int(cls_index)
        self.t1.setflags(write=False)
        self.t2.setflags(write=False)

    @classmethod
    def zeros(cls, grid: Grid, cls_index: int = 0) -> "FlowField":
        return cls(grid, np.zeros((grid.nx - 1, grid.ny)),
                   np.zeros((grid.nx, grid.ny - 1)), cls_index)

    def __repr__(self):
        return f"FlowField(class={self.cls_index}, {self.grid.nx}x{self.grid.ny})"


def divergence(flow: FlowField) -> ScalarField:
    """Discrete divergence of a face flow, in bps/m^2.

    Cell (i, j) gets (t1_east - t1_west)/h1 + (t2_south - t2_north)/h2 with
    the missing outer-boundary faces contributing zero flux. Exactly linear,
    and the cell-area-weighted total telescopes to zero.
    """
    return ScalarField(flow.grid, divergence_arrays(flow.t1, flow.t2, flow.grid))


def divergence_arrays(t1: np.ndarray, t2: np.ndarray, grid: Grid) -> np.ndarray:
    div = np.zeros(grid.shape)
    div[:-1, :] += t1 / grid.h1   # east face is outflow for its west cell
    div[1:, :] -= t1 / grid.h1
    div[:, :-1] += t2 / grid.h2
    div[:, 1:] -= t2 / grid.h2
    return div


# ---------------------------------------------------------------------------
# CSV field files
#
# line 1: nx,ny,h1,h2
# line 2: kind=<scalar|t1|t2>,class=<j>     (class=-1 for plain scalars)
# then one row per x2 index: the values with fixed j, ordered by i.
# Scalars have ny rows of nx values; t1 has ny rows of nx-1 values; t2 has
# ny-1 rows of nx values. Floats are written with 17 significant digits, so
# a write/read round trip is value-exact.
# ---------------------------------------------------------------------------

_KINDS = ("scalar", "t1", "t2")


def _format_row(row: np.ndarray) -> str:
    return ",".join(f"{v:.17g}" for v in row)


def write_field(field: ScalarField, path, cls_index: int = -1) -> None:
    _write_array(field.grid, field.values, "scalar", cls_index, path)


def write_flow(flow: FlowField, t1_path, t2_path) -> None:
    _write_array(flow.grid, flow.t1, "t1", flow.cls_index, t1_path)
    _write_array(flow.grid, flow.t2, "t2", flow.cls_index, t2_path)


def _write_array(grid: Grid, values: np.ndarray, kind: str, cls_index: int, path) -> None:
    lines = [f"{grid.nx},{grid.ny},{grid.h1:.17g},{grid.h2:.17g}",
             f"kind={kind},class={cls_index}"]
    for j in range(values.shape[1]):
        lines.append(_format_row(values[:, j]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class FieldFile:
    """Parsed field CSV: grid header, kind tag, class index and raw values."""

    nx: int
    ny: int
    h1: float
    h2: float
    kind: str
    cls_index: int
    values: np.ndarray = field(repr=False)

    def grid(self) -> Grid:
        return Grid(a=self.h1 * self.nx, b=self.h2 * self.ny, nx=self.nx, ny=self.ny)


def read_field(path) -> FieldFile:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not any(line.strip() for line in lines):
        raise FieldParseError("empty field file", line=1)
    try:
        parts = lines[0].split(",")
        if len(parts) != 4:
            raise ValueError(f"expected nx,ny,h1,h2 but got {len(parts)} entries")
        nx, ny = int(parts[0]), int(parts[1])
        h1, h2 = float(parts[2]), float(parts[3])
    except ValueError as exc:
        raise FieldParseError(f"bad header: {exc}", line=1) from None
    if len(lines) < 2:
        raise FieldParseError("missing kind header", line=2)
    kind, cls_index = _parse_kind_line(lines[1])

    if kind == "scalar":
        ncols, nrows = nx, ny
    elif kind == "t1":
        ncols, nrows = nx - 1, ny
    else:
        ncols, nrows = nx, ny - 1

    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        entries = line.split(",")
        if len(entries) != ncols:
            raise FieldParseError(
                f"expected {ncols} values for kind={kind} with nx={nx}, got {len(entries)}",
                line=lineno)
        try:
            rows.append([float(v) for v in entries])
        except ValueError as exc:
            raise FieldParseError(str(exc), line=lineno) from None
    if len(rows) != nrows:
        raise FieldParseError(
            f"expected {nrows} data rows for kind={kind} with ny={ny}, got {len(rows)}",
            line=len(lines))
    values = np.asarray(rows, dtype=np.float64).T  # rows are fixed-j slices
    return FieldFile(nx=nx, ny=ny, h1=h1, h2=h2, kind=kind,
                     cls_index=cls_index, values=values)


def _parse_kind_line(line: str) -> tuple[str, int]:
    try:
        kind_part, cls_part = line.split(",")
        kind = kind_part.split("=", 1)[1].strip()
        cls_index = int(cls_part.split("=", 1)[1])
    except (ValueError, IndexError):
        raise FieldParseError(f"bad kind header {line!r}", line=2) from None
    if kind not in _KINDS:
        raise FieldParseError(f"unknown kind {kind!r}", line=2)
    return kind, cls_index


def read_scalar(path, grid: Grid | None = None, allow_inf: bool = False) -> ScalarField:
    ff = read_field(path)
    if ff.kind != "scalar":
        raise FieldParseError(f"expected a scalar field, found kind={ff.kind}", line=2)
    g = grid or ff.grid()
    if (ff.nx, ff.ny) != (g.nx, g.ny):
        raise FieldParseError(
            f"grid mismatch: file is {ff.nx}x{ff.ny}, expected {g.nx}x{g.ny}", line=1)
    return ScalarField(g, ff.values, allow_inf=allow_inf)


def read_flow(t1_path, t2_path, grid: Grid | None = None) -> FlowField:
    f1 = read_field(t1_path)
    f2 = read_field(t2_path)
    if f1.kind != "t1" or f2.kind != "t2":
        raise FieldParseError(
            f"expected kinds t1/t2, found {f1.kind}/{f2.kind}", line=2)
    g = grid or f1.grid()
    if (f1.nx, f1.ny) != (g.nx, g.ny) or (f2.nx, f2.ny) != (g.nx, g.ny):
        raise FieldParseError("flow component grids disagree", line=1)
    return FlowField(g, f1.values, f2.values, cls_index=f1.cls_index)
