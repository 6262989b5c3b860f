"""Flow assignment: global optimum, user equilibrium, and diagnostics.

Both solvers are Frank-Wolfe on face flows. The linearized subproblem
"cheapest feasible reroute under frozen link costs" is exactly a
minimum-cost-to-go sweep plus greedy loading per class, so each iteration is
one `solve_value_edges` + `load_greedy_flows` pass per class against the
marginal transport cost (global problem) or the per-packet cost (user
equilibrium, equivalently minimizing the potential objective). The step size
comes from an exact line search: closed form for affine costs, a bracketed
root of the directional derivative for monomials, gamma = 1 for flow-
independent costs, with 2/(k+2) as a guarded fallback.

Feasibility is preserved by construction: every all-or-nothing loading
satisfies conservation for its class, and convex combinations keep it. The
reported relative gap (cost-weighted flow minus reloaded cost, over the
former) is a true optimality bound for convex models.

For affine per-packet costs the first-order conditions close into a linear
elliptic problem: eliminating T_i = -(a_i dzeta/dx_i + b_i) with a_i = 1/k_i
and b_i = h_i/k_i turns conservation into a flux-form Poisson equation for
the multiplier zeta, solved here by conjugate gradients on the same
staggered stencil, so the recovered flow satisfies div T = rho to solver
tolerance by construction. Where the recovered flow goes negative, the
positivity assumption behind the elimination fails; this is reported, never
clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .costs import Affine, CostModel
from .errors import NumericalError, PreconditionError, ValidationError
from .grid import FlowField, Grid, ScalarField, divergence_arrays
from .hjb import ValueField, solve_value_edges
from .poisson import solve_flux_poisson
from .scenario import ClassDemand, Scenario

_TINY = 1e-300


@dataclass
class ResidualReport:
    """First-order (complementarity) diagnostics of a flow against a cost
    slope field: the per-face residual is cost + potential difference per
    unit length, zero on used faces and nonnegative on unused ones at an
    exact optimum."""

    max_used: float
    mean_used: float
    frac_used_above_tol: float
    max_unused_violation: float
    relative_gap: float
    mean_link_cost: float
    flow_threshold: float
    tol: float

    def as_dict(self) -> dict:
        return {
            "max_used": self.max_used,
            "mean_used": self.mean_used,
            "frac_used_above_tol": self.frac_used_above_tol,
            "max_unused_violation": self.max_unused_violation,
            "relative_gap": self.relative_gap,
            "mean_link_cost": self.mean_link_cost,
            "flow_threshold": self.flow_threshold,
            "tol": self.tol,
        }


@dataclass
class AssignmentResult:
    grid: Grid
    flows: list[FlowField]
    objective: float
    gap_history: list[float] = dc_field(repr=False)
    iterations: int = 0
    converged: bool = False
    zeta: ScalarField | None = None
    value_fields: list[ValueField] | None = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def relative_gap(self) -> float:
        return self.gap_history[-1] if self.gap_history else float("nan")

    def total_flow(self) -> FlowField:
        t1 = sum(f.t1 for f in self.flows)
        t2 = sum(f.t2 for f in self.flows)
        return FlowField(self.grid, t1, t2, validate=False)


def _reachable_mask(target: np.ndarray) -> np.ndarray:
    """Cells from which some target is reachable by east/south moves."""
    nx, ny = target.shape
    reach = np.zeros_like(target, dtype=bool)
    for i in range(nx - 1, -1, -1):
        row = target[i, :].copy()
        if i < nx - 1:
            row |= reach[i + 1, :]
        reach[i, :] = np.logical_or.accumulate(row[::-1])[::-1]
    return reach


def _prepare_demands(demands: list[ClassDemand], grid: Grid):
    prepared = []
    for dem in demands:
        if dem.is_zero:
            prepared.append((dem, None, None))
            continue
        target = dem.sinks
        if not target.any():
            raise ValidationError(
                f"class {dem.cls_index} has sources but no sinks (rho < 0 nowhere)")
        inject = np.clip(dem.rho.values, 0.0, None) * grid.cell_area
        bad = (inject > 0) & ~_reachable_mask(target)
        if bad.any():
            cells = [tuple(map(int, c)) for c in np.argwhere(bad)[:8]]
            raise PreconditionError(
                f"class {dem.cls_index}: sources cannot reach any sink by "
                f"east/south moves: {cells}")
        prepared.append((dem, inject, target))
    return prepared


def _exact_step(model: CostModel, fp, t1, t2, d1, d2, use_marginal: bool,
                iteration: int) -> tuple[float, str]:
    """Minimize the (convex) objective along T + gamma * D over [0, 1]."""
    if not model.congestion_dependent:
        return 1.0, "linear"
    if isinstance(model, Affine):
        k1e, k2s, h1e, h2s = fp
        scale = 1.0 if use_marginal else 0.5
        num = (np.sum((scale * k1e * t1 + h1e) * d1)
               + np.sum((scale * k2s * t2 + h2s) * d2))
        den = scale * (np.sum(k1e * d1 * d1) + np.sum(k2s * d2 * d2))
        if den <= 0.0:
            return 0.0, "degenerate"
        return float(np.clip(-num / den, 0.0, 1.0)), "closed_form"
    k1e, k2s = fp
    beta = model.beta

    def dphi(gamma: float) -> float:
        return float(np.sum(k1e * (t1 + gamma * d1) ** beta * d1)
                     + np.sum(k2s * (t2 + gamma * d2) ** beta * d2))

    lo, hi = dphi(0.0), dphi(1.0)
    if lo >= 0.0:
        return 0.0, "endpoint"
    if hi <= 0.0:
        return 1.0, "endpoint"
    try:
        gamma = brentq(dphi, 0.0, 1.0, xtol=1e-14)
        return float(gamma), "brentq"
    except (RuntimeError, ValueError):
        return 2.0 / (iteration + 2.0), "msa_fallback"


def _frank_wolfe(scenario: Scenario, use_marginal: bool,
                 callback=None) -> AssignmentResult:
    model = scenario.require_cost_model()
    if model.congestion_dependent and not model.convex_for_assignment:
        raise ValidationError(
            "assignment needs a convex model: affine, or monomial with beta >= 1")
    grid = scenario.grid
    opts = scenario.options
    demands = _prepare_demands(scenario.require_demands(), grid)
    live = [(idx, dem, inject, target) for idx, (dem, inject, target)
            in enumerate(demands) if inject is not None]
    n_classes = len(demands)
    dA = grid.cell_area
    fp = model.face_params()

    t1 = [np.zeros((grid.nx - 1, grid.ny)) for _ in range(n_classes)]
    t2 = [np.zeros((grid.nx, grid.ny - 1)) for _ in range(n_classes)]
    tot1 = np.zeros((grid.nx - 1, grid.ny))
    tot2 = np.zeros((grid.nx, grid.ny - 1))

    def cost_faces():
        fn = model.marginal_cost_arrays if use_marginal else model.packet_cost_arrays
        return fn(*fp, tot1, tot2)

    def objective() -> float:
        if use_marginal:
            g1, g2 = model.packet_cost_arrays(*fp, tot1, tot2)
            return float((np.sum(g1 * tot1) + np.sum(g2 * tot2)) * dA)
        p1, p2 = model.potential_arrays(*fp, tot1, tot2)
        return float((np.sum(p1) + np.sum(p2)) * dA)

    gap_history: list[float] = []
    value_fields: list[ValueField | None] = [None] * n_classes
    converged = False
    step_kinds: dict[str, int] = {}

    def subproblem():
        """Sweep + load every live class at the current total-flow costs.
        Returns the per-class reroute flows, their loaded cost, and the
        cost-weighted volume of the current flows."""
        c1f, c2f = cost_faces()
        east_edge = c1f * grid.h1
        south_edge = c2f * grid.h2
        aon1 = [None] * n_classes
        aon2 = [None] * n_classes
        aon_cost = 0.0
        for idx, dem, inject, target in live:
            vf = solve_value_edges(east_edge, south_edge, target, grid)
            value_fields[idx] = vf
            a1, a2, _ = kernels.load_greedy_flows(vf.policy, inject, grid.h1, grid.h2)
            aon1[idx], aon2[idx] = a1, a2
            src = inject > 0
            aon_cost += float(np.sum(inject[src] * vf.value[src]))
        cur_cost = float((np.sum(c1f * tot1) + np.sum(c2f * tot2)) * dA)
        return aon1, aon2, aon_cost, cur_cost

    # Feasible starting point: all-or-nothing at empty-network costs.
    aon1, aon2, _, _ = subproblem()
    for idx, *_ in live:
        t1[idx] = aon1[idx]
        t2[idx] = aon2[idx]
    tot1 = sum(t1)
    tot2 = sum(t2)
    obj = objective()

    iteration = 0
    while True:
        aon1, aon2, aon_cost, cur_cost = subproblem()
        gap = (cur_cost - aon_cost) / max(abs(cur_cost), _TINY)
        gap_history.append(gap)
        if callback is not None:
            callback({"iteration": iteration, "objective": obj, "gap": gap,
                      "cost_volume": cur_cost, "t1": tot1, "t2": tot2})
        if gap <= opts.tol:
            converged = True
            break
        if iteration >= opts.max_iters:
            break

        d1 = sum(aon1[idx] - t1[idx] for idx, *_ in live)
        d2 = sum(aon2[idx] - t2[idx] for idx, *_ in live)
        gamma, kind = _exact_step(model, fp, tot1, tot2, d1, d2,
                                  use_marginal, iteration)
        step_kinds[kind] = step_kinds.get(kind, 0) + 1
        if gamma == 0.0:
            break
        for idx, *_ in live:
            t1[idx] += gamma * (aon1[idx] - t1[idx])
            t2[idx] += gamma * (aon2[idx] - t2[idx])
        tot1 = sum(t1)
        tot2 = sum(t2)
        new_obj = objective()
        if new_obj > obj + 1e-12 * max(1.0, abs(obj)):
            raise NumericalError(
                f"objective increased at iteration {iteration}: "
                f"{obj!r} -> {new_obj!r} (step {gamma:.3e}, {kind})")
        obj = new_obj
        iteration += 1

    flows = [FlowField(grid, t1[idx], t2[idx], cls_index=dem.cls_index)
             for idx, (dem, _, _) in enumerate(demands)]
    result = AssignmentResult(
        grid=grid, flows=flows, objective=objective(), gap_history=gap_history,
        iterations=iteration, converged=converged,
        value_fields=[vf for vf in value_fields if vf is not None],
        meta={"problem": "global" if use_marginal else "wardrop",
              "steps": step_kinds,
              "live_classes": [idx for idx, *_ in live]})
    if opts.compute_zeta:
        m1, m2 = model.marginal_cost_arrays(*fp, tot1, tot2)
        result.zeta = recover_zeta_estimate(m1, m2, grid, rtol=opts.cg_rtol)
    return result


def solve_global(scenario: Scenario, callback=None) -> AssignmentResult:
    """Minimize the total transport cost over conservation-feasible flows."""
    return _frank_wolfe(scenario, use_marginal=True, callback=callback)


def solve_wardrop(scenario: Scenario, callback=None) -> AssignmentResult:
    """User equilibrium via the potential transform: the same Frank-Wolfe
    loop driven by per-packet costs, which minimizes the potential objective;
    its optimum satisfies the equilibrium conditions."""
    return _frank_wolfe(scenario, use_marginal=False, callback=callback)


def solve_affine_direct(scenario: Scenario,
                        assume_positive_flows: bool = True) -> AssignmentResult:
    """Single-class affine assignment by the multiplier elliptic solve.

    Solves -div(a grad zeta) = rho + div(b) with the zero-flux staggered
    stencil (consistent singular system, CG in the zero-mean subspace),
    recovers T_i = -(a_i dzeta/dx_i + b_i) on interior faces, and reports
    face negativity. zeta is gauged to zero mean over the boundary ring.
    With assume_positive_flows=False, negativity is an error instead.
    """
    model = scenario.require_cost_model()
    if not isinstance(model, Affine):
        raise ValidationError("the direct elliptic solve requires an affine cost model")
    demands = scenario.require_demands()
    if len(demands) != 1:
        raise ValidationError("the direct elliptic solve handles a single class")
    grid = scenario.grid
    dem = demands[0]
    k1e, k2s, h1e, h2s = model.face_params()
    a1 = 1.0 / k1e
    a2 = 1.0 / k2s
    b1 = h1e / k1e
    b2 = h2s / k2s
    rhs = dem.rho.values + divergence_arrays(b1, b2, grid)
    zeta, info = solve_flux_poisson(a1, a2, rhs, grid, rtol=scenario.options.cg_rtol,
                                    max_iter=scenario.options.cg_max_iter)

    t1 = -(a1 * (zeta[1:, :] - zeta[:-1, :]) / grid.h1 + b1)
    t2 = -(a2 * (zeta[:, 1:] - zeta[:, :-1]) / grid.h2 + b2)
    scale = max(float(np.abs(t1).max(initial=0.0)), float(np.abs(t2).max(initial=0.0)), 1.0)
    neg1 = int(np.count_nonzero(t1 < -1e-12 * scale))
    neg2 = int(np.count_nonzero(t2 < -1e-12 * scale))
    min_flow = float(min(t1.min(initial=0.0), t2.min(initial=0.0)))
    if (neg1 or neg2) and not assume_positive_flows:
        raise NumericalError(
            f"recovered flow violates positivity on {neg1 + neg2} faces "
            f"(min {min_flow:.3e}); the elimination assumes T > 0")

    ring = np.zeros(grid.shape, dtype=bool)
    ring[0, :] = ring[-1, :] = True
    ring[:, 0] = ring[:, -1] = True
    zeta = zeta - zeta[ring].mean()

    flow = FlowField(grid, t1, t2, cls_index=dem.cls_index,
                     validate=not (neg1 or neg2))
    g1, g2 = model.packet_cost_arrays(k1e, k2s, h1e, h2s, t1, t2)
    objective = float((np.sum(g1 * t1) + np.sum(g2 * t2)) * grid.cell_area)
    return AssignmentResult(
        grid=grid, flows=[flow], objective=objective, gap_history=[],
        iterations=info.iterations, converged=True,
        zeta=ScalarField(grid, zeta),
        meta={"problem": "affine_direct", "cg_residual": info.residual,
              "negative_faces": neg1 + neg2, "min_recovered_flow": min_flow})


def recover_zeta_estimate(m1: np.ndarray, m2: np.ndarray, grid: Grid,
                          rtol: float = 1e-10) -> ScalarField:
    """Least-squares multiplier fit: minimize the summed squared stationarity
    residual (m + grad zeta) over all faces with the boundary ring pinned to
    zero. Normal equations are the unit-coefficient flux Laplacian against
    the discrete divergence of the marginal field. Diagnostic only."""
    ring = np.zeros(grid.shape, dtype=bool)
    ring[0, :] = ring[-1, :] = True
    ring[:, 0] = ring[:, -1] = True
    rhs = divergence_arrays(m1, m2, grid)
    ones1 = np.ones((grid.nx - 1, grid.ny))
    ones2 = np.ones((grid.nx, grid.ny - 1))
    zeta, _ = solve_flux_poisson(ones1, ones2, rhs, grid, rtol=rtol,
                                 dirichlet_mask=ring)
    return ScalarField(grid, zeta)


def _residual_report(r1: np.ndarray, r2: np.ndarray, c1f: np.ndarray,
                     c2f: np.ndarray, t1: np.ndarray, t2: np.ndarray,
                     dA: float, tol_rel: float, flow_tol_rel: float) -> ResidualReport:
    scale = max(float(t1.max(initial=0.0)), float(t2.max(initial=0.0)), _TINY)
    thresh = flow_tol_rel * scale
    used1 = t1 > thresh
    used2 = t2 > thresh
    mean_cost = float((np.sum(np.abs(c1f)) + np.sum(np.abs(c2f)))
                      / (c1f.size + c2f.size))
    tol = tol_rel * mean_cost

    used_abs = np.concatenate([np.abs(r1[used1]).ravel(), np.abs(r2[used2]).ravel()])
    max_used = float(used_abs.max(initial=0.0))
    vol = float(np.sum(t1[used1]) + np.sum(t2[used2]))
    weighted = float(np.sum(np.abs(r1[used1]) * t1[used1])
                     + np.sum(np.abs(r2[used2]) * t2[used2]))
    mean_used = weighted / max(vol, _TINY)
    frac_above = float(np.count_nonzero(used_abs > tol) / max(used_abs.size, 1))
    unused = np.concatenate([np.clip(-r1[~used1], 0.0, None).ravel(),
                             np.clip(-r2[~used2], 0.0, None).ravel()])
    max_unused = float(unused.max(initial=0.0))
    cost_volume = float(np.sum(c1f * t1) + np.sum(c2f * t2)) * dA
    signed = float(np.sum(r1 * t1) + np.sum(r2 * t2)) * dA
    rel_gap = signed / max(abs(cost_volume), _TINY)
    return ResidualReport(max_used=max_used, mean_used=mean_used,
                          frac_used_above_tol=frac_above,
                          max_unused_violation=max_unused,
                          relative_gap=rel_gap, mean_link_cost=mean_cost,
                          flow_threshold=thresh, tol=tol)


def kkt_residual(flows, model: CostModel, zeta: ScalarField,
                 tol_rel: float = 1e-3, flow_tol_rel: float = 1e-9) -> ResidualReport:
    """Stationarity/complementarity check of the global problem: per-face
    residual = marginal cost + multiplier difference per unit length."""
    grid = zeta.grid
    t1, t2 = _total_arrays(flows)
    fp = model.face_params()
    m1, m2 = model.marginal_cost_arrays(*fp, t1, t2)
    z = zeta.values
    r1 = m1 + (z[1:, :] - z[:-1, :]) / grid.h1
    r2 = m2 + (z[:, 1:] - z[:, :-1]) / grid.h2
    return _residual_report(r1, r2, m1, m2, t1, t2, grid.cell_area,
                            tol_rel, flow_tol_rel)


def wardrop_residual(flows, model: CostModel, value_fields,
                     tol_rel: float = 1e-3, flow_tol_rel: float = 1e-9) -> ResidualReport:
    """Equilibrium check: per-face, per-class residual = per-packet cost of
    the total flow + value difference per unit length; used faces of a class
    are faces its own flow uses. The worst class is reported."""
    flows = flows if isinstance(flows, (list, tuple)) else [flows]
    value_fields = value_fields if isinstance(value_fields, (list, tuple)) else [value_fields]
    if len(flows) != len(value_fields):
        raise ValidationError("need one value field per class flow")
    grid = flows[0].grid
    t1, t2 = _total_arrays(flows)
    fp = model.face_params()
    c1f, c2f = model.packet_cost_arrays(*fp, t1, t2)
    reports = []
    for flow, vf in zip(flows, value_fields):
        v = vf.value if isinstance(vf, ValueField) else np.asarray(vf)
        r1 = c1f + (v[1:, :] - v[:-1, :]) / grid.h1
        r2 = c2f + (v[:, 1:] - v[:, :-1]) / grid.h2
        # Faces touching unreachable cells (V = inf on both sides) are
        # vacuously compliant and never carry flow.
        r1 = np.nan_to_num(r1, nan=0.0, posinf=0.0)
        r2 = np.nan_to_num(r2, nan=0.0, posinf=0.0)
        reports.append(_residual_report(r1, r2, c1f, c2f, flow.t1, flow.t2,
                                        grid.cell_area, tol_rel, flow_tol_rel))
    return max(reports, key=lambda r: max(r.mean_used, r.max_unused_violation))


def _total_arrays(flows) -> tuple[np.ndarray, np.ndarray]:
    flows = flows if isinstance(flows, (list, tuple)) else [flows]
    t1 = sum(f.t1 for f in flows)
    t2 = sum(f.t2 for f in flows)
    return np.asarray(t1, dtype=np.float64), np.asarray(t2, dtype=np.float64)


def conservation_error(flows, demands) -> float:
    """Relative L2 mismatch between div(total flow) and the total demand
    density (exact for single-sink classes)."""
    flows = flows if isinstance(flows, (list, tuple)) else [flows]
    demands = demands if isinstance(demands, (list, tuple)) else [demands]
    grid = flows[0].grid
    t1, t2 = _total_arrays(flows)
    div = divergence_arrays(t1, t2, grid)
    rho = sum(d.rho.values for d in demands)
    num = float(np.sqrt(np.sum((div - rho) ** 2)))
    den = float(np.sqrt(np.sum(rho ** 2)))
    return num / max(den, _TINY)
