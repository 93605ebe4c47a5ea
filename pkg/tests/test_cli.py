import json
import math
import os

import numpy as np
import pytest

from fdkin import equilibrium as eq
from fdkin.cli import dispatch
from fdkin.config import ConfigError, load_config, parse_config, serialize_config
from fdkin.snapshots import load_series

MINIMAL = {
    "kernel": {"gamma": 1.0, "angular": {"type": "constant", "b0": 0.0796}},
    "eps": 0.1,
    "initial": {
        "type": "two_maxwellians",
        "rho1": 0.15, "u1": [1.0, 0.0, 0.0], "t1": 0.5,
        "rho2": 0.15, "u2": [-1.0, 0.0, 0.0], "t2": 0.5,
    },
}


def fast_config(tmp_path, **overrides):
    cfg = dict(MINIMAL)
    cfg.update(
        {
            "t_end": 0.4,
            "grid": {"n": 8, "l": 4.0},
            "theta": 0.4,
            "diag_stride": 2,
            "output_dir": str(tmp_path / "out"),
            "seed": 7,
            "threads": 2,
        }
    )
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


class TestParseConfig:
    def test_minimal_defaults(self):
        rc = parse_config(json.dumps(MINIMAL))
        sim = rc.sim
        assert sim.n == 16
        assert sim.theta == 0.5
        assert sim.n_theta == 8 and sim.n_phi == 8
        assert sim.diag_stride == 10
        assert sim.l is None
        # default half-width tracks the datum energy
        _, _, e = __import__("fdkin.solver", fromlist=["nominal_moments"]).nominal_moments(sim.initial, sim.eps)
        assert sim.resolved_l() == pytest.approx(6.0 * math.sqrt(e))

    def test_unknown_key_rejected(self):
        bad = dict(MINIMAL)
        bad["colour"] = 3
        with pytest.raises(ConfigError, match="colour"):
            parse_config(json.dumps(bad))

    def test_nested_unknown_key(self):
        bad = json.loads(json.dumps(MINIMAL))
        bad["kernel"]["angular"]["b1"] = 2.0
        with pytest.raises(ConfigError, match="kernel.angular.b1"):
            parse_config(json.dumps(bad))

    def test_saturated_eps_rejected(self):
        bad = dict(MINIMAL)
        bad["eps"] = 1e6
        with pytest.raises(eq.SaturationError):
            parse_config(json.dumps(bad))

    def test_round_trip(self):
        rc = parse_config(json.dumps(MINIMAL))
        rc2 = parse_config(serialize_config(rc))
        assert rc2 == rc

    def test_malformed_json(self):
        with pytest.raises(ConfigError):
            parse_config("{not json")


class TestEquilibriumCommand:
    def test_json_output(self, capsys):
        code = dispatch(["equilibrium", "--rho", "1", "--e", "1", "--eps", "0.1"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["eps_sat"] == pytest.approx(46.832, abs=1e-2)
        assert doc["eps_sat_dagger"] == pytest.approx(0.0625 * doc["eps_sat"], rel=1e-2)
        assert doc["b_eps"] < 0
        assert doc["c_inf"] == pytest.approx(1.0, rel=1e-12)
        assert len(doc["c_1k"]) == 3

    def test_saturated_eps_fails(self, capsys):
        code = dispatch(["equilibrium", "--rho", "1", "--e", "1", "--eps", "50"])
        assert code == 1


class TestSimulateCommand:
    def test_outputs_and_header(self, tmp_path):
        cfg = fast_config(tmp_path, snapshot_times=[0.2])
        assert dispatch(["simulate", "--config", cfg]) == 0
        out = tmp_path / "out"
        series = (out / "series.csv").read_text().splitlines()
        assert series[0] == (
            "t,rho,ux,uy,uz,E,sup_f,kappa_min,l1s2,l1s3,H_eps,H_rel,D_eps,"
            "l1k2_dist,sand_lo,sand_hi,ckp_margin"
        )
        assert (out / "run.json").exists()
        assert (out / "snapshot_final.csv").exists()
        assert (out / "snapshot_t0.2.csv").exists()
        data = load_series(str(out / "series.csv"))
        assert data["t"][0] == 0.0
        assert np.all(np.isfinite(data["rho"]))

    def test_usage_error_exit_code(self):
        assert dispatch(["simulate"]) == 2


class TestVerifyCommand:
    def test_equilibrium_start_all_pass(self, tmp_path, capsys):
        cfg = fast_config(
            tmp_path,
            initial={"type": "scaled_equilibrium", "rho": 1.0, "u": [0, 0, 0], "e": 1.0, "amplitude": 0.0},
            eps=0.5,
            t_end=0.3,
        )
        code = dispatch(["verify", "--config", cfg])
        out = capsys.readouterr().out
        assert code == 0, out
        verdict = json.loads((tmp_path / "out" / "verdict.json").read_text())
        assert verdict["all_pass"] is True
        names = {c["name"] for c in verdict["checks"]}
        assert {"conservation", "h_monotone", "gaussian_floor", "pauli_clamping"} <= names

    def test_determinism_byte_identical(self, tmp_path):
        cfg = fast_config(tmp_path, diag_stride=1)
        out1 = tmp_path / "v1.json"
        out2 = tmp_path / "v2.json"
        code1 = dispatch(["verify", "--config", cfg, "--output", str(out1)])
        code2 = dispatch(["verify", "--config", cfg, "--output", str(out2)])
        assert code1 == code2
        assert out1.read_bytes() == out2.read_bytes()


class TestSweepCommand:
    def test_sweep_json(self, tmp_path):
        cfg = fast_config(tmp_path, t_end=0.3)
        out = tmp_path / "sweep.json"
        code = dispatch(["sweep", "--config", cfg, "--eps-list", "0.05,0.1", "--output", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["eps_values"] == [0.05, 0.1]
        assert doc["linfty_uniform_pass"] is True
        assert doc["nonsaturation_pass"] is True
        assert len(doc["sup_linf"]) == 2


class TestReportCommand:
    def test_figures_rendered(self, tmp_path):
        cfg = fast_config(tmp_path)
        assert dispatch(["simulate", "--config", cfg]) == 0
        assert dispatch(["report", "--run-dir", str(tmp_path / "out")]) == 0
        for name in ("conservation.png", "entropy_decay.png", "distance_decay.png", "saturation.png"):
            assert (tmp_path / "out" / name).exists()
