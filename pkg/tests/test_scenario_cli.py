import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from denseroute import read_flow, read_scalar
from denseroute.cli import main
from denseroute.grid import divergence
from denseroute.scenario import load_scenario

FIXTURES = Path(__file__).parent.parent / "fixtures"


def run_cli(mode, scenario, out, *extra):
    return main([mode, "--scenario", str(scenario), "--out", str(out), *extra])


def bundle_bytes(out_dir):
    """Byte content of every bundle file except the volatile timing sidecar."""
    out = {}
    for p in sorted(Path(out_dir).iterdir()):
        if p.name == "timings.json":
            continue
        out[p.name] = p.read_bytes()
    return out


def write_scenario(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestValidateMode:
    def test_balanced_scenario_passes(self, tmp_path):
        assert run_cli("validate", FIXTURES / "validate_multiclass.json",
                       tmp_path / "out") == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["ok"]
        assert any(c.startswith("balance_class") for c in report["checks"])

    def test_unbalanced_demand_exits_2_citing_balance(self, tmp_path, capsys):
        doc = {
            "grid": {"a": 1.0, "b": 1.0, "nx": 6, "ny": 6},
            "demand": [{"class": 0,
                        "cells": [{"cell": [0, 0], "rate": 1.0},
                                  {"cell": [5, 5], "rate": -0.5}]}],
        }
        path = write_scenario(tmp_path, doc)
        assert run_cli("validate", path, tmp_path / "out") == 2
        assert "total rate balance" in capsys.readouterr().err

    def test_unknown_key_exits_2_with_pointer(self, tmp_path, capsys):
        doc = {"grid": {"a": 1.0, "b": 1.0, "nx": 6, "ny": 6},
               "solver": {"tol": 1e-4, "mystery": 3}}
        path = write_scenario(tmp_path, doc)
        assert run_cli("validate", path, tmp_path / "out") == 2
        assert "/solver" in capsys.readouterr().err

    def test_malformed_json_exits_2(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert run_cli("validate", path, tmp_path / "out") == 2

    def test_missing_field_csv_exits_2(self, tmp_path):
        doc = {"grid": {"a": 1.0, "b": 1.0, "nx": 6, "ny": 6},
               "hjb": {"c1": {"csv": "nowhere.csv"}, "c2": 1.0,
                       "targets": {"cells": [[5, 5]]}}}
        path = write_scenario(tmp_path, doc)
        assert run_cli("hjb", path, tmp_path / "out") == 2

    def test_numerical_failure_exits_3(self, tmp_path):
        # CG cannot converge within a 3-iteration cap
        doc = json.loads((FIXTURES / "affine_direct_16.json").read_text())
        doc["solver"] = {"cg_rtol": 1e-10, "cg_max_iter": 3}
        path = write_scenario(tmp_path, doc)
        assert run_cli("affine-direct", path, tmp_path / "out") == 3


class TestBundles:
    def test_hjb_bundle(self, tmp_path):
        assert run_cli("hjb", FIXTURES / "hjb_smooth_16.json", tmp_path / "o") == 0
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["reachable_fraction"] == 1.0
        assert "value_at_origin" in report
        value = read_scalar(tmp_path / "o" / "value.csv", allow_inf=True)
        assert np.isfinite(value.values).all()
        assert (tmp_path / "o" / "path.csv").exists()

    def test_geometry_bundle(self, tmp_path):
        assert run_cli("geometry", FIXTURES / "geometry_attractor_32.json",
                       tmp_path / "o") == 0
        cls = json.loads((tmp_path / "o" / "classification.json").read_text())
        assert cls["case"] == "attractor_split"
        assert (tmp_path / "o" / "curve.csv").exists()

    def test_flow_bundle_revalidates_conservation(self, tmp_path):
        assert run_cli("affine-direct", FIXTURES / "affine_direct_16.json",
                       tmp_path / "o") == 0
        flow = read_flow(tmp_path / "o" / "t1_class0.csv",
                         tmp_path / "o" / "t2_class0.csv")
        rho = read_scalar(tmp_path / "o" / "rho_class0.csv")
        div = divergence(flow)
        err = np.sqrt(np.sum((div.values - rho.values) ** 2)
                      / np.sum(rho.values ** 2))
        assert err <= 1e-8

    def test_input_hash_covers_referenced_files(self, tmp_path):
        shutil.copy(FIXTURES / "hjb_smooth_16.json", tmp_path / "s.json")
        shutil.copy(FIXTURES / "hjb_c1.csv", tmp_path / "hjb_c1.csv")
        shutil.copy(FIXTURES / "hjb_c2.csv", tmp_path / "hjb_c2.csv")
        assert run_cli("hjb", tmp_path / "s.json", tmp_path / "o1") == 0
        h1 = json.loads((tmp_path / "o1" / "report.json").read_text())["input_hash"]
        # perturb a referenced field: the hash must change
        field = read_scalar(tmp_path / "hjb_c1.csv")
        from denseroute import ScalarField, write_field
        write_field(ScalarField(field.grid, field.values + 0.001),
                    tmp_path / "hjb_c1.csv")
        assert run_cli("hjb", tmp_path / "s.json", tmp_path / "o2") == 0
        h2 = json.loads((tmp_path / "o2" / "report.json").read_text())["input_hash"]
        assert h1 != h2


class TestDeterminism:
    @pytest.mark.parametrize("fixture,mode", [
        ("validate_multiclass.json", "validate"),
        ("hjb_smooth_16.json", "hjb"),
        ("geometry_attractor_32.json", "geometry"),
        ("affine_direct_16.json", "affine-direct"),
        ("dafermos_modes.json", "dafermos"),
    ])
    def test_reruns_are_byte_identical(self, tmp_path, fixture, mode):
        assert run_cli(mode, FIXTURES / fixture, tmp_path / "a") == 0
        assert run_cli(mode, FIXTURES / fixture, tmp_path / "b") == 0
        a = bundle_bytes(tmp_path / "a")
        b = bundle_bytes(tmp_path / "b")
        assert a.keys() == b.keys()
        for name in a:
            assert a[name] == b[name], f"{name} differs between reruns"


@pytest.mark.slow
class TestEquilibriumCoincidence:
    def test_wardrop_and_global_flows_coincide_for_quadratic_costs(self, tmp_path):
        """With power-law packet costs the equilibrium and the optimum load
        the same flows; the two CLI bundles agree in relative L2."""
        fixture = FIXTURES / "wardrop_monomial_16.json"
        assert run_cli("wardrop", fixture, tmp_path / "ue") == 0
        assert run_cli("global", fixture, tmp_path / "so") == 0
        ue = read_flow(tmp_path / "ue" / "t1_class0.csv",
                       tmp_path / "ue" / "t2_class0.csv")
        so = read_flow(tmp_path / "so" / "t1_class0.csv",
                       tmp_path / "so" / "t2_class0.csv")
        num = np.sqrt(np.sum((ue.t1 - so.t1) ** 2) + np.sum((ue.t2 - so.t2) ** 2))
        den = np.sqrt(np.sum(so.t1 ** 2) + np.sum(so.t2 ** 2))
        assert num / den <= 1e-3


class TestScenarioLoading:
    def test_line_source_balances(self):
        sc = load_scenario(FIXTURES / "validate_multiclass.json")
        assert len(sc.demands) == 2
        for dem in sc.demands:
            net = abs(dem.rho.values.sum()) * sc.grid.cell_area
            assert net <= 1e-12

    def test_mode_and_options_loaded(self):
        sc = load_scenario(FIXTURES / "global_affine_16.json")
        assert sc.mode == "global"
        assert sc.options.tol == 1e-4
        assert sc.options.max_iters == 60000

    def test_cli_overrides_options(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli("affine-direct", FIXTURES / "affine_direct_16.json",
                       out, "--tol", "0.01", "--seed", "7") == 0
        report = json.loads((out / "report.json").read_text())
        assert report["options"]["tol"] == 0.01
        assert report["options"]["seed"] == 7
