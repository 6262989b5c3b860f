"""Staircase paths, line integrals, and Green's-theorem checks.

A staircase path is a monotone chain of cells where each step moves one cell
east (+x1) or south (+x2). Path costs integrate the per-direction cost
fields c1 (charged on east moves) and c2 (south moves) with per-cell
midpoint quadrature: a step between the centers of two adjacent cells spans
half of each cell, so its cost is the mean of the two cell values times the
spacing. This makes path costs, the DP value recursion, and flow loading
agree exactly rather than to quadrature error.

The sign structure behind the closed-form path geometry is the discrete
analogue of Green's theorem: for two monotone paths p (further north) and q
(further south) with the same endpoints,

    cost(p) - cost(q) = integral of U over the area between them,

with U = dc2/dx1 - dc1/dx2. `green_check` evaluates both sides of that
identity by independent quadratures for any simple rectilinear loop of cell
centers.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, PreconditionError, ValidationError
from .grid import Grid


class StaircasePath:
    """Monotone east/south chain of cells.

    cells is an (n, 2) int array of (i, j) indices; consecutive cells differ
    by exactly one step east or south. meta carries provenance (tie-break
    rule, tie counts, which geometric case produced it).
    """

    def __init__(self, cells, meta: dict | None = None):
        cells = np.atleast_2d(np.asarray(cells, dtype=np.int64))
        if cells.ndim != 2 or cells.shape[1] != 2:
            raise ValidationError(f"path cells must be (n, 2), got {cells.shape}")
        steps = np.diff(cells, axis=0)
        east = (steps[:, 0] == 1) & (steps[:, 1] == 0)
        south = (steps[:, 0] == 0) & (steps[:, 1] == 1)
        if not np.all(east | south):
            bad = int(np.flatnonzero(~(east | south))[0])
            raise ValidationError(
                f"step {bad} is not a single east or south move: "
                f"{cells[bad]} -> {cells[bad + 1]}")
        self.cells = cells
        self.cells.setflags(write=False)
        self.meta = dict(meta or {})

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def steps(self) -> np.ndarray:
        """0 for an east step, 1 for a south step."""
        return np.diff(self.cells, axis=0)[:, 1]

    def check_inside(self, grid: Grid) -> None:
        c = self.cells
        if (c < 0).any() or (c[:, 0] >= grid.nx).any() or (c[:, 1] >= grid.ny).any():
            raise DomainError("path leaves the grid")

    def vertices(self, grid: Grid) -> np.ndarray:
        """Turn-point polyline of cell-center coordinates, shape (m, 2)."""
        c = self.cells
        if len(c) == 1:
            keep = np.array([0])
        else:
            s = self.steps
            interior = np.flatnonzero(s[1:] != s[:-1]) + 1
            keep = np.concatenate(([0], interior, [len(c) - 1]))
        pts = (c[keep] + 0.5) * np.array([grid.h1, grid.h2])
        return pts


def staircase_between(origin: tuple[int, int], dest: tuple[int, int],
                      east_first: bool, meta: dict | None = None) -> StaircasePath:
    """Single-turn L-path between cells; dest must lie east/south of origin."""
    (io, jo), (id_, jd) = origin, dest
    if id_ < io or jd < jo:
        raise PreconditionError(f"destination {dest} is not east/south of origin {origin}")
    if east_first:
        mid = [(i, jo) for i in range(io, id_ + 1)]
        tail = [(id_, j) for j in range(jo + 1, jd + 1)]
    else:
        mid = [(io, j) for j in range(jo, jd + 1)]
        tail = [(i, jd) for i in range(io + 1, id_ + 1)]
    return StaircasePath(np.array(mid + tail), meta=meta)


def _face_mean_east(c1: np.ndarray) -> np.ndarray:
    return 0.5 * (c1[:-1, :] + c1[1:, :])


def _face_mean_south(c2: np.ndarray) -> np.ndarray:
    return 0.5 * (c2[:, :-1] + c2[:, 1:])


def line_integral(c1, c2, path: StaircasePath, grid: Grid) -> float:
    """Cost of a monotone staircase path under cell cost fields c1, c2.

    East steps charge the face mean of c1 times h1, south steps the face
    mean of c2 times h2.
    """
    c1 = _values(c1)
    c2 = _values(c2)
    path.check_inside(grid)
    cells = path.cells
    if len(cells) == 1:
        return 0.0
    a, b = cells[:-1], cells[1:]
    east = b[:, 0] > a[:, 0]
    total = 0.0
    if east.any():
        ea, eb = a[east], b[east]
        total += float(np.sum(0.5 * (c1[ea[:, 0], ea[:, 1]] + c1[eb[:, 0], eb[:, 1]]) * grid.h1))
    south = ~east
    if south.any():
        sa, sb = a[south], b[south]
        total += float(np.sum(0.5 * (c2[sa[:, 0], sa[:, 1]] + c2[sb[:, 0], sb[:, 1]]) * grid.h2))
    return total


def _values(field_or_array) -> np.ndarray:
    return field_or_array.values if hasattr(field_or_array, "values") else np.asarray(field_or_array)


def curl_gap_array(c1: np.ndarray, c2: np.ndarray, h1: float, h2: float) -> np.ndarray:
    """U = dc2/dx1 - dc1/dx2 by centered differences, one-sided at the rim."""
    return np.gradient(c2, h1, axis=0) - np.gradient(c1, h2, axis=1)


def expand_loop(vertex_cells, grid: Grid) -> np.ndarray:
    """Expand a rectilinear loop given by turn vertices into unit cell steps.

    Accepts an (m, 2) list of cell indices where consecutive entries share a
    row or a column; the loop is closed from the last vertex back to the
    first. Returns the (n, 2) closed chain of unit steps and raises if the
    loop revisits a cell (non-simple) or leaves the grid.
    """
    v = np.atleast_2d(np.asarray(vertex_cells, dtype=np.int64))
    if len(v) < 3:
        raise ValidationError("a loop needs at least 3 vertices")
    if not np.array_equal(v[0], v[-1]):
        v = np.vstack([v, v[0]])
    chain = [v[0]]
    for a, b in zip(v[:-1], v[1:]):
        di, dj = int(b[0] - a[0]), int(b[1] - a[1])
        if di != 0 and dj != 0:
            raise ValidationError(f"loop edge {a} -> {b} is not axis-aligned")
        n = abs(di) + abs(dj)
        if n == 0:
            continue
        si, sj = np.sign(di), np.sign(dj)
        for k in range(1, n + 1):
            chain.append(a + np.array([si * k, sj * k]))
    chain = np.asarray(chain)
    if (chain < 0).any() or (chain[:, 0] >= grid.nx).any() or (chain[:, 1] >= grid.ny).any():
        raise DomainError("loop leaves the grid")
    body = chain[:-1]
    uniq = {tuple(c) for c in body}
    if len(uniq) != len(body):
        raise ValidationError("loop is not simple: a cell is visited twice")
    return chain


def green_check(c1, c2, loop_vertex_cells, grid: Grid) -> tuple[float, float]:
    """Loop integral of c.dx and area integral of U over the enclosed region.

    Both sides use independent quadratures: the loop side sums signed
    face-mean step costs; the area side integrates the centered-difference
    curl gap with exact cell-overlap weights for a polygon whose edges run
    along cell-center lines. Signs follow the loop's own orientation, so the
    two numbers agree (to quadrature error) for either traversal direction.
    """
    c1 = _values(c1)
    c2 = _values(c2)
    chain = expand_loop(loop_vertex_cells, grid)
    a, b = chain[:-1], chain[1:]

    loop = 0.0
    di = b[:, 0] - a[:, 0]
    dj = b[:, 1] - a[:, 1]
    east = di == 1
    west = di == -1
    south = dj == 1
    north = dj == -1
    if east.any():
        ea, eb = a[east], b[east]
        loop += np.sum(0.5 * (c1[ea[:, 0], ea[:, 1]] + c1[eb[:, 0], eb[:, 1]]) * grid.h1)
    if west.any():
        wa, wb = a[west], b[west]
        loop -= np.sum(0.5 * (c1[wa[:, 0], wa[:, 1]] + c1[wb[:, 0], wb[:, 1]]) * grid.h1)
    if south.any():
        sa, sb = a[south], b[south]
        loop += np.sum(0.5 * (c2[sa[:, 0], sa[:, 1]] + c2[sb[:, 0], sb[:, 1]]) * grid.h2)
    if north.any():
        na, nb = a[north], b[north]
        loop -= np.sum(0.5 * (c2[na[:, 0], na[:, 1]] + c2[nb[:, 0], nb[:, 1]]) * grid.h2)

    poly = (chain + 0.5) * np.array([grid.h1, grid.h2])
    signed_area = 0.5 * np.sum(poly[:-1, 0] * poly[1:, 1] - poly[1:, 0] * poly[:-1, 1])
    weights = _overlap_weights(poly, grid)
    u = curl_gap_array(c1, c2, grid.h1, grid.h2)
    area = float(np.sign(signed_area) * np.sum(weights * u) * grid.cell_area)
    return float(loop), area


def _overlap_weights(poly: np.ndarray, grid: Grid) -> np.ndarray:
    """Fraction of each cell inside a rectilinear polygon with edges on
    cell-center lines: the average of the inside-indicators of the cell's
    four quarter points, which is exact for this edge placement."""
    x1, x2 = grid.cell_centers()
    w = np.zeros(grid.shape)
    for sx in (-0.25, 0.25):
        for sy in (-0.25, 0.25):
            pts_x = x1 + sx * grid.h1
            pts_y = x2 + sy * grid.h2
            w += _inside_rectilinear(poly, pts_x, pts_y)
    return w / 4.0


def _inside_rectilinear(poly: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Crossing-number test against a closed axis-aligned polygon, vectorized
    over query points. Queries must not lie on the polygon boundary (quarter
    points never do)."""
    inside = np.zeros(px.shape, dtype=np.int64)
    for (x0, y0), (x1, y1) in zip(poly[:-1], poly[1:]):
        if x0 != x1:  # horizontal edge: no crossing with a horizontal ray
            continue
        ylo, yhi = (y0, y1) if y0 < y1 else (y1, y0)
        inside += ((py > ylo) & (py < yhi) & (px < x0)).astype(np.int64)
    return (inside % 2).astype(np.float64)


# ---------------------------------------------------------------------------
# Continuous polylines: exact integrals over piecewise-constant fields,
# resampling and Hausdorff distances (used by the geometric oracle and the
# lattice simulator).
# ---------------------------------------------------------------------------

def polyline_cost(c1, c2, vertices: np.ndarray, grid: Grid) -> float:
    """Exact integral of c1 dx1 + c2 dx2 along a polyline in domain coords.

    Segments may be oblique; each is split at every cell-boundary crossing
    and the piecewise-constant fields are read at sub-segment midpoints.
    """
    c1 = _values(c1)
    c2 = _values(c2)
    v = np.asarray(vertices, dtype=np.float64)
    if (v[:, 0].min() < -1e-12 or v[:, 0].max() > grid.a + 1e-12
            or v[:, 1].min() < -1e-12 or v[:, 1].max() > grid.b + 1e-12):
        raise DomainError("polyline leaves the domain")
    total = 0.0
    for (xa, ya), (xb, yb) in zip(v[:-1], v[1:]):
        dx, dy = xb - xa, yb - ya
        ts = [0.0, 1.0]
        if dx != 0.0:
            lo, hi = sorted((xa, xb))
            for k in range(int(np.ceil(lo / grid.h1)), int(np.floor(hi / grid.h1)) + 1):
                t = (k * grid.h1 - xa) / dx
                if 0.0 < t < 1.0:
                    ts.append(t)
        if dy != 0.0:
            lo, hi = sorted((ya, yb))
            for k in range(int(np.ceil(lo / grid.h2)), int(np.floor(hi / grid.h2)) + 1):
                t = (k * grid.h2 - ya) / dy
                if 0.0 < t < 1.0:
                    ts.append(t)
        ts = np.unique(np.asarray(ts))
        mids = 0.5 * (ts[:-1] + ts[1:])
        mx = xa + mids * dx
        my = ya + mids * dy
        ci = np.minimum((mx / grid.h1).astype(np.int64), grid.nx - 1)
        cj = np.minimum((my / grid.h2).astype(np.int64), grid.ny - 1)
        seg = np.diff(ts)
        total += float(np.sum((c1[ci, cj] * dx + c2[ci, cj] * dy) * seg))
    return total


def segment_cell_lengths(p0, p1, grid: Grid) -> list[tuple[int, int, float]]:
    """Arclength of the segment p0 -> p1 inside each cell it crosses."""
    xa, ya = float(p0[0]), float(p0[1])
    xb, yb = float(p1[0]), float(p1[1])
    dx, dy = xb - xa, yb - ya
    length = float(np.hypot(dx, dy))
    if length == 0.0:
        i, j = grid.cell_of(xa, ya)
        return [(i, j, 0.0)]
    ts = [0.0, 1.0]
    if dx != 0.0:
        lo, hi = sorted((xa, xb))
        for k in range(int(np.ceil(lo / grid.h1)), int(np.floor(hi / grid.h1)) + 1):
            t = (k * grid.h1 - xa) / dx
            if 0.0 < t < 1.0:
                ts.append(t)
    if dy != 0.0:
        lo, hi = sorted((ya, yb))
        for k in range(int(np.ceil(lo / grid.h2)), int(np.floor(hi / grid.h2)) + 1):
            t = (k * grid.h2 - ya) / dy
            if 0.0 < t < 1.0:
                ts.append(t)
    ts = np.unique(np.asarray(ts))
    out = []
    for ta, tb in zip(ts[:-1], ts[1:]):
        tm = 0.5 * (ta + tb)
        i = min(int((xa + tm * dx) / grid.h1), grid.nx - 1)
        j = min(int((ya + tm * dy) / grid.h2), grid.ny - 1)
        out.append((i, j, (tb - ta) * length))
    return out


def resample_polyline(vertices: np.ndarray, ds: float) -> np.ndarray:
    """Points along a polyline at arclength spacing <= ds (endpoints kept)."""
    v = np.asarray(vertices, dtype=np.float64)
    if len(v) == 1:
        return v.copy()
    pts = [v[0]]
    for pa, pb in zip(v[:-1], v[1:]):
        seg = np.hypot(*(pb - pa))
        n = max(1, int(np.ceil(seg / ds)))
        for k in range(1, n + 1):
            pts.append(pa + (pb - pa) * (k / n))
    return np.asarray(pts)


def hausdorff_distance(poly_a: np.ndarray, poly_b: np.ndarray, ds: float) -> float:
    """Symmetric Hausdorff distance between polylines, by dense sampling."""
    pa = resample_polyline(poly_a, ds)
    pb = resample_polyline(poly_b, ds)
    d2 = (np.subtract.outer(pa[:, 0], pb[:, 0]) ** 2
          + np.subtract.outer(pa[:, 1], pb[:, 1]) ** 2)
    return float(np.sqrt(max(d2.min(axis=1).max(), d2.min(axis=0).max())))
