"""Closed-form optimal staircase paths from the sign of the curl gap.

For flow-independent directional costs, comparing two monotone paths with the
same endpoints through Green's theorem gives

    cost(north path) - cost(south path) = integral of U over the enclosed area,

with U = dc2/dx1 - dc1/dx2. The sign of U therefore fixes the optimal shape:

* U > 0 everywhere: the southern route wins; the optimum is the single-turn
  L that goes south first, then east.
* U < 0 everywhere: east first, then south.
* U changes sign across a monotone curve ell running from the north-west
  corner toward the south-east corner, with U > 0 on the north side and
  U < 0 on the south side: ell attracts. Optimal paths reach ell by a
  straight run (south from the north side, east from the south side),
  follow it, and leave it with a straight run to the destination. Paths
  between same-side points are the in-region L clipped against ell.
* The mirrored split (U < 0 north, U > 0 south) repels: same-region queries
  keep their region's L shape, but cross-region queries have no closed form
  and fall back to the DP solver.

All constructions reduce to one row profile r(i) = clip(ell_row(i), j_o, j_d)
walked east with south runs in between; the uniform-sign cases use a profile
pinned at j_d (south-first) or j_o (east-first).

The free-endpoint variant: with U > 0 and sign-compatible boundary costs
(nonnegative along the south edge Gamma1, nonpositive along the east edge
Gamma2), the straight south run to Gamma1 is optimal; with U < 0 and the
signs reversed, the straight east run to Gamma2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import PreconditionError, UnsupportedGeometryError
from .grid import Grid, ScalarField
from .paths import StaircasePath, _values, curl_gap_array

DEFAULT_ZERO_BAND = 1e-9


class GeometryCase(Enum):
    ALL_POSITIVE = "all_positive"
    ALL_NEGATIVE = "all_negative"
    ATTRACTOR_SPLIT = "attractor_split"
    REPELLER_SPLIT = "repeller_split"
    DEGENERATE = "degenerate"
    UNSUPPORTED = "unsupported"


@dataclass
class CurlGapField:
    """U field, its sign classification, the extracted zero curve, and the
    cost fields it came from."""

    grid: Grid
    u: ScalarField
    case: GeometryCase
    band: float
    pos_cells: int
    neg_cells: int
    c1: np.ndarray = field(default=None, repr=False)
    c2: np.ndarray = field(default=None, repr=False)
    crossing_y: np.ndarray | None = field(default=None, repr=False)
    ell_rows: np.ndarray | None = field(default=None, repr=False)

    def curve_polyline(self) -> np.ndarray:
        """The zero curve as a polyline through per-column crossing points."""
        if self.crossing_y is None:
            raise UnsupportedGeometryError(f"no zero curve in case {self.case.value}")
        x = (np.arange(self.grid.nx) + 0.5) * self.grid.h1
        return np.column_stack([x, self.crossing_y])

    def crossing_at(self, x1: float) -> float:
        """Curve ordinate at abscissa x1, linearly interpolated between columns."""
        if self.crossing_y is None:
            raise UnsupportedGeometryError(f"no zero curve in case {self.case.value}")
        x = (np.arange(self.grid.nx) + 0.5) * self.grid.h1
        return float(np.interp(x1, x, self.crossing_y))


@dataclass
class OraclePath:
    """A closed-form optimal path: snapped staircase plus continuum polyline."""

    staircase: StaircasePath
    polyline: np.ndarray = field(repr=False)
    case: GeometryCase
    label: str
    in_region_only: bool = False


def curl_gap(c1, c2, grid: Grid, zero_band_rel: float = DEFAULT_ZERO_BAND) -> CurlGapField:
    """Compute U = dc2/dx1 - dc1/dx2 and classify its sign structure.

    Cells with |U| <= zero_band_rel * max|U| count as zero. When both signs
    occur, the zero curve is extracted per column by linear interpolation of
    the sign change and snapped to a monotone row staircase; sign layouts
    that are not a single monotone NW-to-SE split classify as UNSUPPORTED.
    """
    c1 = _values(c1)
    c2 = _values(c2)
    u = curl_gap_array(c1, c2, grid.h1, grid.h2)
    umax = float(np.abs(u).max())
    band = zero_band_rel * umax
    pos = u > band
    neg = u < -band
    npos = int(pos.sum())
    nneg = int(neg.sum())
    ufield = ScalarField(grid, u)

    if umax == 0.0 or (npos == 0 and nneg == 0):
        return CurlGapField(grid, ufield, GeometryCase.DEGENERATE, band, npos, nneg, c1, c2)
    if nneg == 0:
        return CurlGapField(grid, ufield, GeometryCase.ALL_POSITIVE, band, npos, nneg, c1, c2)
    if npos == 0:
        return CurlGapField(grid, ufield, GeometryCase.ALL_NEGATIVE, band, npos, nneg, c1, c2)

    for case, north_sign in ((GeometryCase.ATTRACTOR_SPLIT, 1.0),
                             (GeometryCase.REPELLER_SPLIT, -1.0)):
        ys = _extract_split_curve(u * north_sign, band, grid)
        if ys is not None:
            rows = np.clip(np.round(ys / grid.h2 - 0.5).astype(np.int64), 0, grid.ny - 1)
            rows = np.maximum.accumulate(rows)
            return CurlGapField(grid, ufield, case, band, npos, nneg, c1, c2,
                                crossing_y=ys, ell_rows=rows)
    return CurlGapField(grid, ufield, GeometryCase.UNSUPPORTED, band, npos, nneg, c1, c2)


def _extract_split_curve(u: np.ndarray, band: float, grid: Grid) -> np.ndarray | None:
    """Per-column crossing ordinates for a field that should be positive north
    of the curve and negative south of it; None if any column breaks that
    pattern or the crossings are not monotone."""
    nx, ny = u.shape
    yc = (np.arange(ny) + 0.5) * grid.h2
    ys = np.empty(nx)
    for i in range(nx):
        col = u[i, :]
        pos_rows = np.flatnonzero(col > band)
        neg_rows = np.flatnonzero(col < -band)
        if len(pos_rows) and len(neg_rows):
            jp, jn = pos_rows[-1], neg_rows[0]
            if jp > jn:
                return None  # signs interleave: not a single split
            ys[i] = yc[jp] + (0.0 - col[jp]) * (yc[jn] - yc[jp]) / (col[jn] - col[jp])
        elif len(pos_rows):
            ys[i] = grid.b  # whole column north of the curve
        elif len(neg_rows):
            ys[i] = 0.0     # whole column south of the curve
        else:
            ys[i] = np.nan
    known = ~np.isnan(ys)
    if known.any() and not known.all():
        xs = np.arange(nx, dtype=float)
        ys[~known] = np.interp(xs[~known], xs[known], ys[known])
    drop = np.diff(ys).min(initial=0.0)
    if drop < -0.5 * grid.h2:
        return None  # decreasing beyond interpolation noise: not monotone
    return np.maximum.accumulate(ys)


def _snap(grid: Grid, point) -> tuple[int, int]:
    return grid.nearest_cell(float(point[0]), float(point[1]))


def _check_order(origin_cell, dest_cell) -> None:
    if dest_cell[0] < origin_cell[0] or dest_cell[1] < origin_cell[1]:
        raise PreconditionError(
            f"destination cell {dest_cell} is not reachable from {origin_cell} "
            "by east/south moves")


def _profile_path(io: int, jo: int, id_: int, jd: int,
                  rows: np.ndarray, meta: dict) -> StaircasePath:
    """Walk the row profile: south to rows[0] in the origin column, then east
    with south runs between columns, then south to the destination row."""
    cells = [(io, j) for j in range(jo, rows[0] + 1)]
    for step, i in enumerate(range(io + 1, id_ + 1)):
        cells.append((i, rows[step]))
        cells.extend((i, j) for j in range(rows[step] + 1, rows[step + 1] + 1))
    last_row = rows[id_ - io]
    cells.extend((id_, j) for j in range(last_row + 1, jd + 1))
    return StaircasePath(np.asarray(cells), meta=meta)


def _profile_polyline(x1o, x2o, x1d, x2d, grid: Grid,
                      crossing_y: np.ndarray | None, fill: float | None) -> np.ndarray:
    """Continuum counterpart of the profile walk. fill pins the profile at a
    constant ordinate (uniform-sign cases); otherwise the crossing curve is
    clipped to [x2o, x2d]."""
    if crossing_y is None:
        r_start = r_end = fill
        mids = np.empty((0, 2))
    else:
        xc = (np.arange(grid.nx) + 0.5) * grid.h1
        sel = (xc > x1o) & (xc < x1d)
        ys = np.clip(crossing_y, x2o, x2d)
        mids = np.column_stack([xc[sel], ys[sel]])
        r_start = float(np.clip(np.interp(x1o, xc, crossing_y), x2o, x2d))
        r_end = float(np.clip(np.interp(x1d, xc, crossing_y), x2o, x2d))
    pts = [(x1o, x2o), (x1o, r_start)]
    pts.extend(map(tuple, mids))
    pts.extend([(x1d, r_end), (x1d, x2d)])
    out = [pts[0]]
    for p in pts[1:]:
        if p != out[-1]:
            out.append(p)
    return np.asarray(out)


def point_to_point_path(cg: CurlGapField, origin, dest) -> OraclePath:
    """Closed-form optimal staircase between two points (snapped to cells).

    Uniform-sign fields give the single-turn L of their sign; an attractor
    split gives the clip-against-ell construction (straight reach, follow the
    curve, straight leave); repeller splits are delegated to the same-region
    construction and rejected across regions.
    """
    grid = cg.grid
    (io, jo), (id_, jd) = _snap(grid, origin), _snap(grid, dest)
    _check_order((io, jo), (id_, jd))
    x1o, x2o = float(origin[0]), float(origin[1])
    x1d, x2d = float(dest[0]), float(dest[1])
    n = id_ - io + 1

    if cg.case in (GeometryCase.ALL_POSITIVE, GeometryCase.ALL_NEGATIVE,
                   GeometryCase.DEGENERATE):
        south_first = cg.case == GeometryCase.ALL_POSITIVE
        rows = np.full(n, jd if south_first else jo, dtype=np.int64)
        label = "south_first_L" if south_first else "east_first_L"
        if cg.case == GeometryCase.DEGENERATE:
            label = "east_first_L_degenerate"  # every monotone path is optimal
        path = _profile_path(io, jo, id_, jd, rows, {"case": cg.case.value, "label": label})
        poly = _profile_polyline(x1o, x2o, x1d, x2d, grid, None,
                                 x2d if south_first else x2o)
        return OraclePath(path, poly, cg.case, label)

    if cg.case == GeometryCase.ATTRACTOR_SPLIT:
        rows = np.clip(cg.ell_rows[io:id_ + 1], jo, jd)
        region_o = _region_of(cg, io, jo)
        region_d = _region_of(cg, id_, jd)
        label = f"attractor_{region_o}_to_{region_d}"
        path = _profile_path(io, jo, id_, jd, rows, {"case": cg.case.value, "label": label})
        poly = _profile_polyline(x1o, x2o, x1d, x2d, grid, cg.crossing_y, None)
        return OraclePath(path, poly, cg.case, label)

    if cg.case == GeometryCase.REPELLER_SPLIT:
        return repeller_same_region_path(cg, origin, dest)
    raise UnsupportedGeometryError(
        "sign layout is not a single monotone split; use the DP solver")


def _region_of(cg: CurlGapField, i: int, j: int) -> str:
    """north / south / on, relative to the extracted curve row in column i."""
    r = int(cg.ell_rows[i])
    if j < r:
        return "north"
    if j > r:
        return "south"
    return "on"


def repeller_same_region_path(cg: CurlGapField, origin, dest) -> OraclePath:
    """Optimal path between two same-region points of a repeller split,
    restricted to paths staying in that region: the region's own L shape
    (east-first north of the curve where U < 0, south-first below it).
    Flagged in_region_only: nothing is claimed against region-crossing paths.
    """
    if cg.case != GeometryCase.REPELLER_SPLIT:
        raise PreconditionError(f"not a repeller split: {cg.case.value}")
    grid = cg.grid
    (io, jo), (id_, jd) = _snap(grid, origin), _snap(grid, dest)
    _check_order((io, jo), (id_, jd))
    region_o = _region_of(cg, io, jo)
    region_d = _region_of(cg, id_, jd)
    if "on" in (region_o, region_d) or region_o != region_d:
        raise UnsupportedGeometryError(
            f"repeller split supports same-region queries only, got "
            f"{region_o} -> {region_d}; use the DP solver")
    n = id_ - io + 1
    south_first = region_o == "south"  # southern region carries U > 0
    rows = np.full(n, jd if south_first else jo, dtype=np.int64)
    label = f"repeller_{region_o}_L"
    path = _profile_path(io, jo, id_, jd, rows,
                         {"case": cg.case.value, "label": label, "in_region_only": True})
    poly = _profile_polyline(float(origin[0]), float(origin[1]),
                             float(dest[0]), float(dest[1]), grid, None,
                             float(dest[1]) if south_first else float(origin[1]))
    return OraclePath(path, poly, cg.case, label, in_region_only=True)


@dataclass
class BoundaryCosts:
    """Costs along the reachable boundary edges: gamma1 is the eastbound cost
    on the south edge (scalar or length-nx array), gamma2 the southbound cost
    on the east edge (scalar or length-ny array). Defaults to the traces of
    the interior cost fields, which is what the optimality argument extends
    along; pass explicit values to model separately priced boundary hops."""

    gamma1: float | np.ndarray | None = None
    gamma2: float | np.ndarray | None = None


def point_to_boundary_path(cg: CurlGapField, origin,
                           boundary_costs: BoundaryCosts | None = None) -> OraclePath:
    """Optimal path from a point to the south/east boundary (Gamma1 u Gamma2).

    Requires a uniform-sign field and sign-compatible boundary costs
    (by default the traces of c1 on the south edge and c2 on the east edge):
    U > 0 needs gamma1 >= 0 and gamma2 <= 0 and yields the straight south
    run to Gamma1; U < 0 needs the reversed signs and yields the straight
    east run to Gamma2. The argument closes both candidate paths through the
    south-east corner along the boundary, so the edge costs must not reward
    the detour.
    """
    grid = cg.grid
    io, jo = _snap(grid, origin)
    x1o, x2o = float(origin[0]), float(origin[1])
    if boundary_costs is None:
        boundary_costs = BoundaryCosts()
    g1 = boundary_costs.gamma1
    g2 = boundary_costs.gamma2
    g1 = cg.c1[:, -1] if g1 is None else np.asarray(g1, dtype=np.float64)
    g2 = cg.c2[-1, :] if g2 is None else np.asarray(g2, dtype=np.float64)
    # Cell-center traces of a field vanishing at the wall sit O(h) off zero;
    # tolerate that much, no more.
    tol = 0.5 * max(grid.h1, grid.h2) * max(float(np.abs(cg.c1).max()),
                                            float(np.abs(cg.c2).max()), 1e-300)
    if cg.case == GeometryCase.ALL_POSITIVE:
        if (g1 < -tol).any():
            raise PreconditionError("U > 0 requires nonnegative cost along Gamma1 (south edge)")
        if (g2 > tol).any():
            raise PreconditionError("U > 0 requires nonpositive cost along Gamma2 (east edge)")
        cells = [(io, j) for j in range(jo, grid.ny)]
        poly = np.array([(x1o, x2o), (x1o, grid.b)])
        label = "vertical_to_gamma1"
    elif cg.case == GeometryCase.ALL_NEGATIVE:
        if (g1 > tol).any():
            raise PreconditionError("U < 0 requires nonpositive cost along Gamma1 (south edge)")
        if (g2 < -tol).any():
            raise PreconditionError("U < 0 requires nonnegative cost along Gamma2 (east edge)")
        cells = [(i, jo) for i in range(io, grid.nx)]
        poly = np.array([(x1o, x2o), (grid.a, x2o)])
        label = "horizontal_to_gamma2"
    else:
        raise UnsupportedGeometryError(
            f"point-to-boundary needs a uniform-sign field, got {cg.case.value}")
    path = StaircasePath(np.asarray(cells), meta={"case": cg.case.value, "label": label})
    return OraclePath(path, poly, cg.case, label)
