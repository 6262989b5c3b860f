"""Scenario files: schema validation, demand stencils, balance checks.

A scenario is a JSON document bundling the grid, the cost model, per-class
demands and solver options, plus mode-specific sections for the non-
assignment tools. Unknown keys are rejected, with the JSON pointer of the
offending key in the error. Demand rates are given in bps and converted to
cell densities (bps/m^2); each class must balance to zero total rate within
1e-9 relative, or loading fails.

Cost parameters and cost fields accept either a plain number (broadcast
over the grid) or {"csv": "relative/path.csv"} referencing a field file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import jsonschema
import numpy as np

from .costs import Affine, CongestionIndependent, CostModel, Monomial
from .errors import ValidationError
from .grid import Grid, ScalarField, read_scalar
from .paths import segment_cell_lengths

BALANCE_RTOL = 1e-9

_FIELD_REF = {
    "oneOf": [
        {"type": "number"},
        {"type": "object", "properties": {"csv": {"type": "string"}},
         "required": ["csv"], "additionalProperties": False},
    ]
}

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_CELL = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["grid"],
    "properties": {
        "mode": {"enum": ["hjb", "geometry", "global", "wardrop", "affine-direct",
                          "dafermos", "dense-sim", "validate"]},
        "output_dir": {"type": "string"},
        "grid": {
            "type": "object", "additionalProperties": False,
            "required": ["a", "b", "nx", "ny"],
            "properties": {
                "a": {"type": "number", "exclusiveMinimum": 0},
                "b": {"type": "number", "exclusiveMinimum": 0},
                "nx": {"type": "integer", "minimum": 2},
                "ny": {"type": "integer", "minimum": 2},
            },
        },
        "cost_model": {
            "type": "object", "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["independent", "monomial", "affine"]},
                "c1": _FIELD_REF, "c2": _FIELD_REF,
                "k1": _FIELD_REF, "k2": _FIELD_REF,
                "h1": _FIELD_REF, "h2": _FIELD_REF,
                "beta": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "demand": {
            "type": "array",
            "items": {
                "type": "object", "additionalProperties": False,
                "properties": {
                    "class": {"type": "integer", "minimum": 0},
                    "cells": {
                        "type": "array",
                        "items": {
                            "type": "object", "additionalProperties": False,
                            "required": ["cell", "rate"],
                            "properties": {"cell": _CELL, "rate": {"type": "number"}},
                        },
                    },
                    "dipole": {
                        "type": "object", "additionalProperties": False,
                        "required": ["source", "sink", "rate"],
                        "properties": {"source": _POINT, "sink": _POINT,
                                       "rate": {"type": "number", "exclusiveMinimum": 0}},
                    },
                    "line_source": {
                        "type": "object", "additionalProperties": False,
                        "required": ["from", "to", "sink", "rate"],
                        "properties": {"from": _POINT, "to": _POINT, "sink": _POINT,
                                       "rate": {"type": "number", "exclusiveMinimum": 0}},
                    },
                },
            },
        },
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "cg_rtol": {"type": "number", "exclusiveMinimum": 0},
                "cg_max_iter": {"type": "integer", "minimum": 1},
                "compute_zeta": {"type": "boolean"},
            },
        },
        "hjb": {
            "type": "object", "additionalProperties": False,
            "required": ["c1", "c2", "targets"],
            "properties": {
                "c1": _FIELD_REF, "c2": _FIELD_REF,
                "targets": {
                    "oneOf": [
                        {"type": "object", "properties": {"cells": {"type": "array", "items": _CELL}},
                         "required": ["cells"], "additionalProperties": False},
                        {"type": "object", "properties": {"csv": {"type": "string"}},
                         "required": ["csv"], "additionalProperties": False},
                    ]
                },
                "origin": _POINT,
            },
        },
        "geometry": {
            "type": "object", "additionalProperties": False,
            "required": ["c1", "c2", "origin"],
            "properties": {
                "c1": _FIELD_REF, "c2": _FIELD_REF,
                "origin": _POINT, "dest": _POINT,
                "query": {"enum": ["point", "boundary"]},
                "gamma1": {"type": "number"}, "gamma2": {"type": "number"},
            },
        },
        "dafermos": {
            "type": "object", "additionalProperties": False,
            "required": ["k1", "k2", "modes"],
            "properties": {
                "k1": {"type": "number", "exclusiveMinimum": 0},
                "k2": {"type": "number", "exclusiveMinimum": 0},
                "modes": {
                    "type": "array",
                    "items": {
                        "type": "object", "additionalProperties": False,
                        "required": ["s"],
                        "properties": {k: {"type": "number"} for k in ("s", "A", "B", "C", "D")},
                    },
                },
                "linear": _POINT,
                "const": {"type": "number"},
            },
        },
        "dense_sim": {
            "type": "object", "additionalProperties": False,
            "required": ["c1", "c2", "densities", "origin", "dest"],
            "properties": {
                "c1": _FIELD_REF, "c2": _FIELD_REF,
                "densities": {"type": "array", "items": {"type": "integer", "minimum": 2},
                              "minItems": 1},
                "origin": _POINT, "dest": _POINT,
            },
        },
    },
}


@dataclass
class SolverOptions:
    tol: float = 1e-4
    max_iters: int = 20000
    seed: int | None = None
    cg_rtol: float = 1e-10
    cg_max_iter: int | None = None
    compute_zeta: bool = True


@dataclass
class ClassDemand:
    cls_index: int
    rho: ScalarField

    @property
    def sinks(self) -> np.ndarray:
        return self.rho.values < 0.0

    @property
    def is_zero(self) -> bool:
        return not np.any(self.rho.values)


@dataclass
class Scenario:
    grid: Grid
    cost_model: CostModel | None = None
    demands: list[ClassDemand] = dc_field(default_factory=list)
    options: SolverOptions = dc_field(default_factory=SolverOptions)
    mode: str | None = None
    output_dir: str | None = None
    extra: dict = dc_field(default_factory=dict)  # mode-specific raw sections
    source_path: Path | None = None
    referenced_files: list[Path] = dc_field(default_factory=list)

    def require_cost_model(self) -> CostModel:
        if self.cost_model is None:
            raise ValidationError("scenario has no cost_model section")
        return self.cost_model

    def require_demands(self) -> list[ClassDemand]:
        if not self.demands:
            raise ValidationError("scenario has no demand section")
        return self.demands


def check_balance(rho: ScalarField) -> None:
    """Total source rate must cancel total sink rate (1e-9 relative)."""
    area = rho.grid.cell_area
    net = float(rho.values.sum()) * area
    scale = float(np.abs(rho.values).sum()) * area
    if abs(net) > BALANCE_RTOL * max(scale, 1e-300):
        raise ValidationError(
            f"demand violates total rate balance: net rate {net:.3e} bps "
            f"against volume {scale:.3e} bps (tolerance {BALANCE_RTOL:g} relative)")


def validate_document(doc: dict) -> None:
    """Schema-check a scenario document; errors carry the JSON pointer."""
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ValidationError(f"scenario schema violation at {pointer or '/'}: {err.message}")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario is not valid JSON: {exc}") from None
    return scenario_from_dict(doc, base_dir=path.parent, source_path=path)


def scenario_from_dict(doc: dict, base_dir=None, source_path=None) -> Scenario:
    validate_document(doc)
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    refs: list[Path] = []
    g = doc["grid"]
    grid = Grid(a=float(g["a"]), b=float(g["b"]), nx=int(g["nx"]), ny=int(g["ny"]))

    model = None
    if "cost_model" in doc:
        model = _build_cost_model(doc["cost_model"], grid, base, refs)

    demands = []
    for entry in doc.get("demand", []):
        demands.append(_build_demand(entry, grid))

    opts = SolverOptions()
    for key, value in doc.get("solver", {}).items():
        setattr(opts, key, value)

    extra = {k: doc[k] for k in ("hjb", "geometry", "dafermos", "dense_sim") if k in doc}
    return Scenario(grid=grid, cost_model=model, demands=demands, options=opts,
                    mode=doc.get("mode"), output_dir=doc.get("output_dir"),
                    extra=extra, source_path=source_path, referenced_files=refs)


def resolve_field(ref, grid: Grid, base: Path, refs: list[Path]) -> ScalarField:
    """A number broadcasts to a constant field; {"csv": ...} loads a file."""
    if isinstance(ref, (int, float)):
        return ScalarField.constant(grid, float(ref))
    csv_path = (base / ref["csv"]).resolve()
    if not csv_path.is_file():
        raise ValidationError(f"referenced field file not found: {csv_path}")
    refs.append(csv_path)
    return read_scalar(csv_path, grid)


def _build_cost_model(section: dict, grid: Grid, base: Path, refs: list[Path]) -> CostModel:
    kind = section["type"]
    need = {"independent": ("c1", "c2"),
            "monomial": ("k1", "k2", "beta"),
            "affine": ("k1", "k2", "h1", "h2")}[kind]
    missing = [k for k in need if k not in section]
    if missing:
        raise ValidationError(f"cost_model type={kind} is missing keys {missing}")
    if kind == "independent":
        return CongestionIndependent(grid,
                                     resolve_field(section["c1"], grid, base, refs),
                                     resolve_field(section["c2"], grid, base, refs))
    if kind == "monomial":
        return Monomial(grid,
                        resolve_field(section["k1"], grid, base, refs),
                        resolve_field(section["k2"], grid, base, refs),
                        beta=float(section["beta"]))
    return Affine(grid,
                  resolve_field(section["k1"], grid, base, refs),
                  resolve_field(section["k2"], grid, base, refs),
                  resolve_field(section["h1"], grid, base, refs),
                  resolve_field(section["h2"], grid, base, refs))


def _build_demand(entry: dict, grid: Grid) -> ClassDemand:
    cls_index = int(entry.get("class", 0))
    stencils = [k for k in ("cells", "dipole", "line_source") if k in entry]
    if len(stencils) != 1:
        raise ValidationError(
            f"demand entry for class {cls_index} must use exactly one of "
            f"cells/dipole/line_source, got {stencils}")
    rho = np.zeros(grid.shape)
    area = grid.cell_area
    if "cells" in entry:
        for item in entry["cells"]:
            i, j = item["cell"]
            if not (0 <= i < grid.nx and 0 <= j < grid.ny):
                raise ValidationError(f"demand cell ({i}, {j}) outside the grid")
            rho[i, j] += item["rate"] / area
    elif "dipole" in entry:
        d = entry["dipole"]
        si, sj = grid.nearest_cell(*d["source"])
        ti, tj = grid.nearest_cell(*d["sink"])
        if (si, sj) == (ti, tj):
            raise ValidationError("dipole source and sink snap to the same cell")
        rho[si, sj] += d["rate"] / area
        rho[ti, tj] -= d["rate"] / area
    else:
        ls = entry["line_source"]
        pieces = segment_cell_lengths(ls["from"], ls["to"], grid)
        total = sum(w for _, _, w in pieces)
        if total <= 0:
            raise ValidationError("line_source segment has zero length")
        for i, j, w in pieces:
            rho[i, j] += ls["rate"] * (w / total) / area
        ti, tj = grid.nearest_cell(*ls["sink"])
        rho[ti, tj] -= ls["rate"] / area
    field = ScalarField(grid, rho)
    check_balance(field)
    return ClassDemand(cls_index=cls_index, rho=field)
