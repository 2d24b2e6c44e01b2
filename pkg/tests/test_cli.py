import json
import os

import numpy as np
import pytest

from psido import cli
from psido import grid as G


def run(command, config, outdir, **kw):
    return cli.run(command, config, str(outdir), **kw)


class TestConfigValidation:
    def test_bad_enum_exits_one(self, tmp_path, capsys):
        code = run("norm", {"norm": {"space": "banach",
                                     "f": {"kind": "cos"}}}, tmp_path)
        assert code == 1
        assert "norm/space" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path):
        assert run("norm", {"norm": {"space": "bessel", "f": {"kind": "cos"},
                                     "bogus": 1}}, tmp_path) == 1

    def test_schema_is_valid_jsonschema(self):
        import jsonschema
        jsonschema.Draft202012Validator.check_schema(cli.CONFIG_SCHEMA)


class TestNormCommand:
    def test_zygmund_cos32(self, tmp_path):
        code = run("norm", {"norm": {"space": "zygmund", "tau": 0.5,
                                     "f": {"kind": "cos", "k": 32}}}, tmp_path)
        assert code == 0
        rep = json.load(open(tmp_path / "report.json"))
        assert rep["report"]["value"] == pytest.approx(2 ** 2.5, rel=1e-6)
        assert (tmp_path / "band_table.csv").exists()

    def test_effective_config_reproduces(self, tmp_path):
        cfg = {"norm": {"space": "bessel", "s": 2, "q": 2,
                        "f": {"kind": "mode", "k": 3}}}
        assert run("norm", cfg, tmp_path / "a") == 0
        eff = json.load(open(tmp_path / "a" / "effective_config.json"))
        assert run(eff["command"], eff, tmp_path / "b",
                   seed=eff["seed"]) == 0
        ra = open(tmp_path / "a" / "report.json", "rb").read()
        rb = open(tmp_path / "b" / "report.json", "rb").read()
        assert ra == rb


class TestDeterminism:
    def test_byte_identical_reports(self, tmp_path):
        cfg = {"recover": {"operator": {"kind": "order_reducer", "m": 1.0},
                           "m": 1.0},
               "grid": {"n": 64, "half_length_pi": 1.0}}
        run("recover", cfg, tmp_path / "r1", seed=5)
        run("recover", cfg, tmp_path / "r2", seed=5)
        b1 = open(tmp_path / "r1" / "report.json", "rb").read()
        b2 = open(tmp_path / "r2" / "report.json", "rb").read()
        assert b1 == b2

    def test_timestamps_live_in_meta(self, tmp_path):
        run("selftest", {}, tmp_path)
        rep = open(tmp_path / "report.json").read()
        assert "timestamp" not in rep
        meta = json.load(open(tmp_path / "meta.json"))
        assert "timestamp" in meta and "version" in meta


class TestSelftest:
    def test_green(self, tmp_path):
        assert run("selftest", {}, tmp_path) == 0
        rep = json.load(open(tmp_path / "report.json"))
        assert rep["verdict"] is True
        assert all(c["pass"] for c in rep["report"]["checks"])


class TestRecoverCommand:
    def test_weierstrass_bundle(self, tmp_path):
        cfg = {"recover": {
            "operator": {"kind": "quantize",
                         "symbol": {"name": "weierstrass_times_bracket",
                                    "tau": 0.5, "m": 1.0, "J": 4}},
            "m": 1.0,
            "classify": {"tau": 0.5, "rho": 1, "M": 2}}}
        code = run("recover", cfg, tmp_path)
        assert code == 0
        rep = json.load(open(tmp_path / "report.json"))
        assert rep["verdict"] is True
        assert rep["report"]["replay_max"] <= 1e-2
        assert (tmp_path / "symbol_table.gst").exists()
        assert (tmp_path / "class_table.csv").exists()

    def test_verdict_false_exit_two(self, tmp_path):
        # classify a genuinely first-order symbol against the order-0 class:
        # recovery succeeds but the class verdict is false ("computed: not a
        # member" is exit 2, distinct from computation failure)
        cfg = {"recover": {
            "operator": {"kind": "quantize",
                         "symbol": {"name": "weierstrass_times_bracket",
                                    "tau": 0.5, "m": 1.0, "J": 4}},
            "m": 0.0,
            "classify": {"tau": 0.5, "rho": 1, "M": 1}}}
        assert run("recover", cfg, tmp_path) == 2


class TestOscintCommand:
    def test_gaussian_trace(self, tmp_path):
        code = run("oscint", {"oscint": {"amplitude": "gaussian",
                                         "evaluator": "regularized"}}, tmp_path)
        assert code == 0
        lines = open(tmp_path / "eps_trace.csv").read().splitlines()
        assert lines[0] == "epsilon,value_re,value_im,delta"
        assert len(lines) == 5  # header + one row per schedule point
        rep = json.load(open(tmp_path / "report.json"))
        assert rep["report"]["abs_error_vs_reference"] <= 1e-6


class TestMembershipCommand:
    def test_matrix_csv_format(self, tmp_path):
        cfg = {"grid": {"n": 32, "half_length_pi": 1.0},
               "membership": {
                   "operator": {"kind": "quantize",
                                "symbol": {"name": "weierstrass_times_bracket",
                                           "tau": 0.5, "m": 1.0, "J": 2}},
                   "m": 1.0, "rho": 1, "m_tilde": 0, "M": 2}}
        code = run("membership", cfg, tmp_path)
        assert code == 0
        lines = open(tmp_path / "membership_matrix.csv").read().splitlines()
        assert lines[0] == "alpha,beta,norm,stable"
        assert len(lines) == 4


class TestApplyCommand:
    def test_output_roundtrip(self, tmp_path):
        cfg = {"apply": {"operator": {"kind": "order_reducer", "m": 2.0},
                         "input": {"kind": "mode", "k": 3}},
               "grid": {"n": 64, "half_length_pi": 1.0}}
        assert run("apply", cfg, tmp_path) == 0
        out = G.load_gridfunction(tmp_path / "output.gfn")
        x = out.grid.axis_nodes()
        np.testing.assert_allclose(out.values, 10 * np.exp(3j * x), atol=1e-9)


class TestComposeCommand:
    def test_multiplier_cancellation(self, tmp_path):
        cfg = {"compose": {"p1": {"name": "bracket_power", "m": 1.0},
                           "p2": {"name": "bracket_power", "m": -1.0}}}
        code = run("compose", cfg, tmp_path)
        assert code in (0, 2)
        rep = json.load(open(tmp_path / "report.json"))
        assert rep["report"]["replay_max"] <= 1e-6


class TestBlowupCommand:
    def test_reports_growth(self, tmp_path):
        cfg = {"blowup": {"coefficient": "weierstrass", "tau": 0.5,
                          "grids": [32, 64]}}
        assert run("blowup", cfg, tmp_path) == 0
        rep = json.load(open(tmp_path / "report.json"))
        assert rep["report"]["growth_factors"][0] >= 1.3
        assert (tmp_path / "refinement_trace.csv").exists()


class TestMainEntry:
    def test_grid_flag_parsing(self, tmp_path, monkeypatch):
        import psido.cli as m
        code = m.main(["selftest", "--out", str(tmp_path), "--grid", "32,1.0",
                       "--quiet"])
        assert code == 0

    def test_missing_config_file(self, tmp_path):
        import psido.cli as m
        code = m.main(["norm", "--config", str(tmp_path / "nope.json"),
                       "--out", str(tmp_path)])
        assert code == 1
