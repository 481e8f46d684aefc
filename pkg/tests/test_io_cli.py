from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from qwalk_topo.cli import COMMANDS, main, sixop_line_segments
from qwalk_topo.errors import ConfigError
from qwalk_topo.io import CSV_VERSION, ExperimentConfig, format_value, read_csv, state_rows, write_csv, write_json
from qwalk_topo.lattice import Line, localized_state
from qwalk_topo.topology import gapless_lines_sixop

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
PI = np.pi

# regression values fixed by the first oracle run of the shipped configs
PLATEAU_P10 = 0.6779998370997307
PLATEAU_P60 = 0.21007612519300153
DECAY_P60 = 0.01608099996829244


def run(tmp_path: Path, command: str, doc: dict | Path, name: str = "out", workers: int = 1) -> tuple[int, Path]:
    if isinstance(doc, dict):
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps(doc))
    else:
        cfg = doc
    out = tmp_path / name
    return main([command, "--config", str(cfg), "--out", str(out), "--workers", str(workers)]), out


def load(path: Path) -> dict:
    return json.loads(path.read_text())


class TestCsv:
    def test_header_and_digits(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", ["x", "flag", "n"], [[1 / 3, True, 7]])
        lines = p.read_text().splitlines()
        assert lines[0] == CSV_VERSION
        assert lines[1] == "x,flag,n"
        assert lines[2] == "0.33333333333333331,1,7"

    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(20, 3)) * 10.0 ** rng.integers(-20, 20, size=(20, 3))
        p = write_csv(tmp_path / "b.csv", ["a", "b", "c"], vals.tolist())
        cols, data = read_csv(p)
        assert cols == ["a", "b", "c"]
        np.testing.assert_array_equal(data, vals)

    def test_none_is_empty(self):
        assert format_value(None) == ""
        assert format_value(np.int64(3)) == "3"

    def test_rejects_foreign_file(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("x\n1\n")
        with pytest.raises(ConfigError):
            read_csv(p)

    def test_state_snapshot(self):
        cols, rows = state_rows(localized_state(Line(3), 0, (1, 1j)))
        assert cols == ["site", "re_up", "im_up", "re_down", "im_down"]
        assert rows[1][0] == 0 and rows[1][4] == pytest.approx(2 ** -0.5)

    def test_json_sorted_and_nonfinite(self, tmp_path):
        p = write_json(tmp_path / "d.json", {"b": np.float64(np.inf), "a": np.arange(2)})
        assert p.read_text().index('"a"') < p.read_text().index('"b"')
        assert load(p) == {"a": [0, 1], "b": "inf"}


class TestConfig:
    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_configs_round_trip(self, path):
        cfg = ExperimentConfig.load(path)
        assert ExperimentConfig.from_dict(json.loads(cfg.dumps())) == cfg
        assert json.loads(cfg.dumps()) == json.loads(path.read_text())

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "nonexistent"})

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "walk1d", "colour": "red"})

    def test_shipped_configs_labelled(self):
        labels = {ExperimentConfig.load(p).paper_figure for p in CONFIGS.glob("*.json")}
        assert {"5a", "5b", "8c", "10b"} <= labels


WALK = {
    "experiment": "walk1d",
    "params": {
        "protocol": {"family": "conventional", "theta": {"kind": "uniform", "theta": 0.9}},
        "steps": 0,
        "spin": [1, 0],
    },
}


class TestExitCodes:
    def test_success_and_initial_echo(self, tmp_path):
        code, out = run(tmp_path, "walk1d", WALK)
        assert code == 0
        _, data = read_csv(out / "distribution.csv")
        assert data.shape == (3, 3)
        np.testing.assert_array_equal(data[:, 2], [0, 1, 0])

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert main(["walk1d", "--config", str(p), "--out", str(tmp_path / "o")]) == 1

    def test_missing_parameter(self, tmp_path):
        doc = {"experiment": "walk1d", "params": {"steps": 3}}
        assert run(tmp_path, "walk1d", doc)[0] == 1

    def test_wrong_subcommand(self, tmp_path):
        assert run(tmp_path, "phase1d", WALK)[0] == 1

    def test_missing_config_flag(self):
        assert main(["walk1d"]) == 1

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["walk1d", "--bogus"])
        assert exc.value.code == 1

    def test_numerical_failure(self, tmp_path):
        doc = {"experiment": "spectrum", "params": {
            "protocol": {"family": "conventional", "theta": {"kind": "uniform", "theta": 0.9}},
            "geometry": {"kind": "line", "length": 12000}}}
        assert run(tmp_path, "spectrum", doc)[0] == 2


class TestSelftests:
    @pytest.mark.parametrize("command", sorted(COMMANDS))
    def test_selftest(self, command, capsys):
        assert main([command, "--selftest"]) == 0
        assert "selftest passed" in capsys.readouterr().out


class TestDeterminism:
    def test_walk_byte_identical(self, tmp_path):
        cfg = CONFIGS / "domain_wall_walk1d.json"
        _, a = run(tmp_path, "walk1d", cfg, "a")
        _, b = run(tmp_path, "walk1d", cfg, "b")
        for name in ("distribution.csv", "window.csv", "walk1d.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_phase_sweep_independent_of_workers(self, tmp_path):
        doc = {"experiment": "phase1d", "params": {
            "theta1": {"start": -3.0, "stop": 3.0, "num": 6}, "theta2": {"start": -3.0, "stop": 3.0, "num": 6},
            "n_k": 128}}
        _, a = run(tmp_path, "phase1d", doc, "a", workers=1)
        _, b = run(tmp_path, "phase1d", doc, "b", workers=4)
        assert (a / "phase1d.csv").read_bytes() == (b / "phase1d.csv").read_bytes()


class TestExperiments:
    def test_domain_wall_plateau(self, tmp_path):
        code, out = run(tmp_path, "walk1d", CONFIGS / "domain_wall_walk1d.json")
        assert code == 0
        p = load(out / "walk1d.json")["p_window"]
        assert p[10] == pytest.approx(PLATEAU_P10, abs=1e-12)
        assert p[60] == pytest.approx(PLATEAU_P60, abs=1e-12)
        assert p[60] > 0.1 * p[10]

    def test_no_bound_state_decay(self, tmp_path):
        code, out = run(tmp_path, "walk1d", CONFIGS / "no_bound_state_walk1d.json")
        assert code == 0
        p60 = load(out / "walk1d.json")["p_window_final"]
        assert p60 == pytest.approx(DECAY_P60, abs=1e-12)
        assert p60 < 0.02

    def test_phase1d_small_grid(self, tmp_path):
        doc = {"experiment": "phase1d", "params": {
            "theta1": [0.7, -1.2], "theta2": [0.7, -0.7, 2 * PI - 0.7, 0.2, 2.5], "n_k": 256}}
        code, out = run(tmp_path, "phase1d", doc)
        assert code == 0
        _, data = read_csv(out / "phase1d.csv")
        t1, t2, w, g0, gpi, crit = data.T
        assert set(w[~np.isnan(w)]) <= {0.0, 1.0}
        assert np.all(np.isnan(w) == (crit == 1))
        diag = (t1 == 0.7) & (t2 == 0.7)
        assert gpi[diag][0] < 1e-6
        anti = (t1 == 0.7) & (np.isclose(t2, 2 * PI - 0.7))
        assert gpi[anti][0] < 1e-6

    def test_phase2d_simple_zero(self, tmp_path):
        doc = {"experiment": "phase2d", "params": {
            "family": "simple2d", "theta1": [0.4, 2.0], "theta2": [1.1, 2.9], "n_k": 32}}
        code, out = run(tmp_path, "phase2d", doc)
        assert code == 0
        assert load(out / "phase2d.json")["chern_values"] in ([0], [])

    def test_phase2d_lines_match_min_gap(self, tmp_path):
        t = np.linspace(0, 2 * PI, 9)[:-1]
        doc = {"experiment": "phase2d", "params": {
            "family": "sixop", "theta1": t.tolist(), "theta2": t.tolist(), "n_k": 32}}
        code, out = run(tmp_path, "phase2d", doc)
        assert code == 0
        text = (out / "phase2d.csv").read_text().splitlines()[2:]
        for line in text:
            a, b, chern, g0, gpi, status = line.split(",")
            cls = gapless_lines_sixop(float(a), float(b))
            assert cls.status == status
            if cls.at_0:
                assert float(g0) < 1e-6
            if cls.at_pi:
                assert float(gpi) < 1e-6
            if cls.gapped and min(float(g0), float(gpi)) > 1e-6:
                assert int(chern) in (-1, 0, 1)

    def test_line_segments_on_lines(self):
        for seg in sixop_line_segments(0.0, 2 * PI, -2 * PI, 2 * PI):
            for frac in (0.0, 0.3, 1.0):
                p = np.array(seg["p0"]) + frac * (np.array(seg["p1"]) - np.array(seg["p0"]))
                cls = gapless_lines_sixop(*p, tol=1e-9)
                if "0" in seg["gap"].split(","):
                    assert cls.at_0
                if "pi" in seg["gap"].split(","):
                    assert cls.at_pi

    def test_edge2d_uniform_has_no_edges(self, tmp_path):
        doc = {"experiment": "edge2d", "params": {
            "protocol": {"family": "simple2d", "theta1": {"kind": "uniform", "theta": 0.4},
                         "theta2": {"kind": "uniform", "theta": 1.3}},
            "ly": 12, "n_kx": 9}}
        code, out = run(tmp_path, "edge2d", doc)
        assert code == 0
        assert load(out / "edge2d.json")["edge_tagged"] == 0

    def test_boundstate_quarter_turn(self, tmp_path):
        doc = {"experiment": "boundstate", "params": {"theta": PI / 2, "phi": 0.0, "length": 60}}
        code, out = run(tmp_path, "boundstate", doc)
        assert code == 0
        rep = load(out / "boundstate.json")
        assert rep["analytic"]["fidelity"] >= 1 - 1e-8
        assert (out / "bound_state.csv").exists()

    def test_boundstate_half_turn(self, tmp_path):
        doc = {"experiment": "boundstate", "params": {"theta": PI, "phi": 0.0, "length": 20}}
        code, out = run(tmp_path, "boundstate", doc)
        assert code == 0
        _, data = read_csv(out / "bound_state.csv")
        np.testing.assert_allclose(np.abs(data[-1, 1:]), [0, 0, 1, 0], atol=1e-15)

    def test_boundstate_broken_symmetry(self, tmp_path):
        doc = {"experiment": "boundstate", "params": {"theta": PI / 2, "phi": PI / 3, "length": 40}}
        code, out = run(tmp_path, "boundstate", doc)
        assert code == 0
        rep = load(out / "boundstate.json")
        assert rep["warning"] == "chiral symmetry broken"
        assert rep["analytic"] is None
        assert rep["chiral_residual"] > 0.1

    def test_spectrum_charges(self, tmp_path):
        doc = {"experiment": "spectrum", "params": {
            "protocol": {"family": "split_step", "theta1": {"kind": "uniform", "theta": 0.0},
                         "theta2": {"kind": "piecewise", "boundary": 1, "theta_minus": -PI, "theta_plus": PI},
                         "boundary": {"kind": "open"}},
            "geometry": {"kind": "line", "length": 40, "offset": 19},
            "charge_theta1": 0.0}}
        code, out = run(tmp_path, "spectrum", doc)
        assert code == 0
        rep = load(out / "spectrum.json")
        assert rep["charges"] == {"Q0": 1, "Qpi": -1}
        assert (rep["n_zero"], rep["n_pi"]) == (1, 1)

    def test_asymptotic_small(self, tmp_path):
        doc = {"experiment": "asymptotic", "params": {"n_k": 65536, "compare_steps": 40}}
        code, out = run(tmp_path, "asymptotic", doc)
        assert code == 0
        cols, data = read_csv(out / "asymptotic.csv")
        assert cols == ["X", "density", "closed_form_printed", "closed_form_derived"]
        assert abs(load(out / "asymptotic.json")["total"] - 1) < 1e-6


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "qwalk_topo", "walk1d", "--selftest"], capture_output=True, text=True)
    assert r.returncode == 0
    if shutil.which("qwalk-topo"):
        r = subprocess.run(["qwalk-topo", "spectrum", "--selftest"], capture_output=True, text=True)
        assert r.returncode == 0
