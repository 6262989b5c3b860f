"""Scenario-driven command line: route-cli <mode> --scenario <file> --out <dir>.

Every mode reads one scenario JSON, writes an artifact bundle into the
output directory (field CSVs, path polyline CSVs, report.json with a
content hash of all inputs), and exits 0 on success, 2 on validation
failure, 3 on numerical failure. Reruns with identical inputs produce
byte-identical bundles; wall-clock timings go to a separate timings.json
that is not part of that contract. The only environment knob is
DENSEROUTE_LOG (log level).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .assignment import (conservation_error, kkt_residual, solve_affine_direct,
                         solve_global, solve_wardrop, wardrop_residual)
from .dafermos import (Mode, SeparableSolution, equalized_cost_residual,
                       flows_from_stream)
from .errors import DenserouteError, NumericalError
from .geometry import BoundaryCosts, curl_gap, point_to_boundary_path, point_to_point_path
from .grid import ScalarField, divergence, write_field, write_flow
from .hjb import extract_path, solve_value
from .netsim import convergence_study
from .scenario import Scenario, check_balance, load_scenario, resolve_field

log = logging.getLogger("denseroute")

MODES = ("hjb", "geometry", "global", "wardrop", "affine-direct",
         "dafermos", "dense-sim", "validate")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="route-cli",
        description="Continuum routing solvers on staggered grids")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", required=True, help="output bundle directory")
    parser.add_argument("--tol", type=float, default=None, help="override solver tolerance")
    parser.add_argument("--max-iters", type=int, default=None, help="override iteration cap")
    parser.add_argument("--seed", type=int, default=None, help="override scenario seed")
    parser.add_argument("--version", action="version", version=__version__)
    args = parser.parse_args(argv)

    logging.basicConfig(level=os.environ.get("DENSEROUTE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        scenario = load_scenario(args.scenario)
        if args.tol is not None:
            scenario.options.tol = args.tol
        if args.max_iters is not None:
            scenario.options.max_iters = args.max_iters
        if args.seed is not None:
            scenario.options.seed = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report = _run_mode(args.mode, scenario, out)
    except NumericalError as exc:
        print(f"route-cli: numerical failure: {exc}", file=sys.stderr)
        return 3
    except DenserouteError as exc:
        print(f"route-cli: {exc}", file=sys.stderr)
        return 2

    report["mode"] = args.mode
    report["input_hash"] = _input_hash(scenario)
    report["options"] = {"tol": scenario.options.tol,
                         "max_iters": scenario.options.max_iters,
                         "seed": scenario.options.seed,
                         "cg_rtol": scenario.options.cg_rtol}
    _write_json(out / "report.json", report)
    # volatile sidecar, not part of the byte-identical bundle contract
    _write_json(out / "timings.json", {"wall_seconds": time.perf_counter() - t0})
    return 0


def _run_mode(mode: str, scenario: Scenario, out: Path) -> dict:
    return {
        "validate": _run_validate,
        "hjb": _run_hjb,
        "geometry": _run_geometry,
        "global": _run_assignment,
        "wardrop": _run_assignment,
        "affine-direct": _run_affine_direct,
        "dafermos": _run_dafermos,
        "dense-sim": _run_dense_sim,
    }[mode](mode, scenario, out)


def _input_hash(scenario: Scenario) -> str:
    digest = hashlib.sha256()
    if scenario.source_path is not None:
        digest.update(Path(scenario.source_path).read_bytes())
    for ref in sorted(set(map(str, scenario.referenced_files))):
        digest.update(Path(ref).read_bytes())
    return digest.hexdigest()


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_polyline(path: Path, vertices: np.ndarray) -> None:
    lines = ["x1,x2"]
    lines.extend(f"{x:.17g},{y:.17g}" for x, y in np.atleast_2d(vertices))
    path.write_text("\n".join(lines) + "\n")


def _extra(scenario: Scenario, key: str) -> dict:
    from .errors import ValidationError
    if key not in scenario.extra:
        raise ValidationError(f"scenario is missing the '{key}' section for this mode")
    return scenario.extra[key]


def _load_ref(scenario: Scenario, ref) -> ScalarField:
    base = scenario.source_path.parent if scenario.source_path else Path.cwd()
    return resolve_field(ref, scenario.grid, base, scenario.referenced_files)


def _run_validate(mode, scenario: Scenario, out: Path) -> dict:
    checks = ["schema"]
    for dem in scenario.demands:
        check_balance(dem.rho)
        checks.append(f"balance_class_{dem.cls_index}")
    if scenario.cost_model is not None:
        checks.append(f"cost_model_{scenario.cost_model.kind}")
    return {"ok": True, "checks": checks,
            "classes": [d.cls_index for d in scenario.demands]}


def _run_hjb(mode, scenario: Scenario, out: Path) -> dict:
    from .errors import ValidationError
    section = _extra(scenario, "hjb")
    grid = scenario.grid
    c1 = _load_ref(scenario, section["c1"])
    c2 = _load_ref(scenario, section["c2"])
    targets = section["targets"]
    mask = np.zeros(grid.shape, dtype=bool)
    if "cells" in targets:
        for i, j in targets["cells"]:
            if not (0 <= i < grid.nx and 0 <= j < grid.ny):
                raise ValidationError(f"target cell ({i}, {j}) outside the grid")
            mask[i, j] = True
    else:
        mask = _load_ref(scenario, {"csv": targets["csv"]}).values != 0.0
    vf = solve_value(c1, c2, mask, grid)
    write_field(vf.as_scalar_field(), out / "value.csv")
    report = {
        "reachable_fraction": float(np.mean(vf.reachable())),
        "ties": vf.tie_count,
    }
    if "origin" in section:
        origin = grid.nearest_cell(*section["origin"])
        path = extract_path(vf, origin)
        _write_polyline(out / "path.csv", path.vertices(grid))
        report["value_at_origin"] = float(vf.value[origin])
    return report


def _run_geometry(mode, scenario: Scenario, out: Path) -> dict:
    section = _extra(scenario, "geometry")
    grid = scenario.grid
    c1 = _load_ref(scenario, section["c1"])
    c2 = _load_ref(scenario, section["c2"])
    cg = curl_gap(c1, c2, grid)
    report = {
        "case": cg.case.value,
        "zero_band": cg.band,
        "positive_cells": cg.pos_cells,
        "negative_cells": cg.neg_cells,
    }
    if cg.crossing_y is not None:
        _write_polyline(out / "curve.csv", cg.curve_polyline())
        report["curve_file"] = "curve.csv"
    query = section.get("query", "point")
    if query == "point":
        from .errors import ValidationError
        if "dest" not in section:
            raise ValidationError("geometry point query needs a 'dest'")
        oracle = point_to_point_path(cg, section["origin"], section["dest"])
    else:
        bc = BoundaryCosts(gamma1=section.get("gamma1", 0.0),
                           gamma2=section.get("gamma2", 0.0))
        oracle = point_to_boundary_path(cg, section["origin"], bc)
    _write_polyline(out / "path.csv", oracle.polyline)
    _write_polyline(out / "path_staircase.csv", oracle.staircase.vertices(grid))
    report["label"] = oracle.label
    report["in_region_only"] = oracle.in_region_only
    classification = dict(report)
    _write_json(out / "classification.json", classification)
    return report


def _run_assignment(mode, scenario: Scenario, out: Path) -> dict:
    solve = solve_global if mode == "global" else solve_wardrop
    result = solve(scenario)
    model = scenario.require_cost_model()
    for dem, flow in zip(scenario.demands, result.flows):
        write_flow(flow, out / f"t1_class{dem.cls_index}.csv",
                   out / f"t2_class{dem.cls_index}.csv")
        write_field(dem.rho, out / f"rho_class{dem.cls_index}.csv", dem.cls_index)
    live = result.meta.get("live_classes", [])
    for idx, vf in zip(live, result.value_fields or []):
        cls_index = scenario.demands[idx].cls_index
        write_field(vf.as_scalar_field(), out / f"value_class{cls_index}.csv",
                    cls_index)
    if result.zeta is not None:
        write_field(result.zeta, out / "zeta.csv")
    _write_rows(out / "gaps.csv", result.gap_history)
    report = {
        "objective": result.objective,
        "relative_gap": result.relative_gap,
        "iterations": result.iterations,
        "converged": result.converged,
        "conservation_error": conservation_error(result.flows, scenario.demands),
        "classes": [d.cls_index for d in scenario.demands],
        "steps": result.meta.get("steps", {}),
    }
    if mode == "wardrop" and result.value_fields and live:
        rep = wardrop_residual([result.flows[i] for i in live], model,
                               result.value_fields)
        report["residual"] = rep.as_dict()
    elif result.zeta is not None:
        rep = kkt_residual(result.flows, model, result.zeta)
        report["residual"] = rep.as_dict()
    return report


def _run_affine_direct(mode, scenario: Scenario, out: Path) -> dict:
    result = solve_affine_direct(scenario)
    dem = scenario.demands[0]
    write_flow(result.flows[0], out / f"t1_class{dem.cls_index}.csv",
               out / f"t2_class{dem.cls_index}.csv")
    write_field(dem.rho, out / f"rho_class{dem.cls_index}.csv", dem.cls_index)
    write_field(result.zeta, out / "zeta.csv")
    rep = kkt_residual(result.flows, scenario.require_cost_model(), result.zeta)
    return {
        "objective": result.objective,
        "cg_iterations": result.iterations,
        "cg_residual": result.meta["cg_residual"],
        "negative_faces": result.meta["negative_faces"],
        "min_recovered_flow": result.meta["min_recovered_flow"],
        "conservation_error": conservation_error(result.flows, scenario.demands),
        "residual": rep.as_dict(),
    }


def _run_dafermos(mode, scenario: Scenario, out: Path) -> dict:
    section = _extra(scenario, "dafermos")
    grid = scenario.grid
    solution = SeparableSolution(
        a=grid.a, b=grid.b, k1=section["k1"], k2=section["k2"],
        modes=[Mode(**m) for m in section["modes"]],
        linear=tuple(section.get("linear", (0.0, 0.0))),
        const=section.get("const", 0.0))
    x1, x2 = grid.cell_centers()
    write_field(ScalarField(grid, solution.phi(x1, x2)), out / "phi.csv")
    sample = flows_from_stream(solution, grid)
    write_flow(sample.flow, out / "t1.csv", out / "t2.csv")
    div = divergence(sample.flow)
    _, eq_max = equalized_cost_residual(sample.flow, solution.k1, solution.k2)
    return {
        "modes": len(solution.modes),
        "divergence_max": float(np.abs(div.values).max()),
        "equalized_cost_max": eq_max,
        "negative_faces": sample.negative_faces,
        "min_t1": sample.min_t1,
        "min_t2": sample.min_t2,
    }


def _run_dense_sim(mode, scenario: Scenario, out: Path) -> dict:
    section = _extra(scenario, "dense_sim")
    grid = scenario.grid
    c1 = _load_ref(scenario, section["c1"])
    c2 = _load_ref(scenario, section["c2"])
    comparisons, info = convergence_study(c1, c2, grid, section["origin"],
                                          section["dest"], section["densities"])
    lines = ["density,hausdorff,cost_ratio"]
    for comp in comparisons:
        lines.append(f"{comp.density},{comp.hausdorff:.17g},{comp.cost_ratio:.17g}")
        _write_polyline(out / f"route_d{comp.density}.csv", comp.route_polyline)
    (out / "convergence.csv").write_text("\n".join(lines) + "\n")
    return {
        "densities": [c.density for c in comparisons],
        "hausdorff": [c.hausdorff for c in comparisons],
        "cost_ratio": [c.cost_ratio for c in comparisons],
        "reference": info,
    }


def _write_rows(path: Path, values) -> None:
    path.write_text("\n".join(f"{v:.17g}" for v in values) + "\n")


if __name__ == "__main__":
    sys.exit(main())
