import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from mbrh.cli import main, run
from mbrh.io import read_csv

SMALL = {"grid": {"nt": 2, "nx": 2, "nlambda": 16},
         "solver": {"nodes_per_piece": 64, "probe_count": 3, "densities": True},
         "oracle": {"delta": 1 / 64, "output_stride": 16},
         "plot": {"signature_n": 20},
         "spectrum": {"n": 21}}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return p


def _invoke(*args):
    return CliRunner().invoke(main, list(args))


def test_help_lists_subcommands():
    res = _invoke("--help")
    assert res.exit_code == 0
    for name in ("spectrum", "phase", "solve", "oracle", "compare", "plotdata"):
        assert name in res.output


def test_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"broadening": {"type": "box", "lambda": -1.0}}))
    out = tmp_path / "out"
    res = _invoke("spectrum", "--config", str(cfg), "--out", str(out))
    assert res.exit_code == 2
    assert not out.exists()


def test_missing_config_exit_2(tmp_path):
    assert run("phase", tmp_path / "nope.yaml", tmp_path / "o") == 2


def test_bad_threads_exit_2(cfg_path, tmp_path):
    assert run("phase", cfg_path, tmp_path / "o", threads=0) == 2


def test_plotdata_without_solve_exit_4(cfg_path, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run("plotdata", cfg_path, empty) == 4
    assert run("plotdata", cfg_path, tmp_path / "absent") == 4


def test_unwritable_output_exit_4(cfg_path, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("phase", cfg_path, blocker / "sub") == 4


def test_phase_outputs(cfg_path, tmp_path):
    out = tmp_path / "o"
    res = _invoke("phase", "--config", str(cfg_path), "--out", str(out))
    assert res.exit_code == 0
    sp = json.loads((out / "stationary_points.json").read_text())
    assert sp["lambda_plus"] == pytest.approx(2.0, abs=1e-10)
    assert sp["lambda_minus"] == pytest.approx(-2.0, abs=1e-10)
    kind, cols = read_csv(out / "level_line.csv")
    assert kind and cols["lambda"].size > 0


def test_spectrum_columns(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert run("spectrum", cfg_path, out) == 0
    kind, cols = read_csv(out / "spectrum.csv")
    assert kind == "spectrum"
    assert {"lambda", "re_r", "im_r", "abs_r"} <= set(cols)
    assert np.max(cols["abs_r"]) <= 1 + 1e-12


def test_solve_plot_compare_pipeline(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert run("solve", cfg_path, out, threads=2, seed=7) == 0
    diag = json.loads((out / "solve_diagnostics.json").read_text())
    assert diag["status"] == "ok"
    assert all(c["pass"] for c in diag["checks"].values())
    _, f = read_csv(out / "field.csv")
    assert f["t"].size == 4
    assert np.all(f["abs_E"][f["t"] <= f["x"]] == 0)
    assert (out / "density.csv").is_file()
    assert run("plotdata", cfg_path, out) == 0
    for name in ("plot_heatmap", "plot_drift", "plot_contour", "plot_signature"):
        assert (out / f"{name}.csv").is_file()
    assert run("compare", cfg_path, out) == 0
    rep = json.loads((out / "compare_diagnostics.json").read_text())
    assert rep["max_E"] < 5e-2


def test_oracle_outputs(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert run("oracle", cfg_path, out) == 0
    diag = json.loads((out / "oracle_diagnostics.json").read_text())
    assert diag["checks"]["causality"]["pass"]
    assert read_csv(out / "oracle_points.csv")[1]["t"].size == 4


def test_deterministic_across_threads(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("solve", cfg_path, a, threads=1, seed=3) == 0
    assert run("solve", cfg_path, b, threads=2, seed=3) == 0
    assert (a / "field.csv").read_text() == (b / "field.csv").read_text()
    da = json.loads((a / "solve_diagnostics.json").read_text())
    db = json.loads((b / "solve_diagnostics.json").read_text())
    assert da["checks"] == db["checks"]
