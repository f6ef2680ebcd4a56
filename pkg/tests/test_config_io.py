import numpy as np
import pytest
import yaml

from mbrh.config import DEFAULTS, ConfigError, RunConfig
from mbrh.io import complex_columns, read_csv, write_csv, write_json


def test_defaults_valid():
    cfg = RunConfig.load(None)
    assert cfg["grid"]["T"] == DEFAULTS["grid"]["T"]
    assert len(cfg.fingerprint) == 16


def test_merge_and_fingerprint(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"grid": {"nt": 3}}))
    cfg = RunConfig.load(p)
    assert cfg["grid"]["nt"] == 3 and cfg["grid"]["nx"] == DEFAULTS["grid"]["nx"]
    assert cfg.fingerprint != RunConfig.load(None).fingerprint


@pytest.mark.parametrize("mapping", [
    {"broadening": {"type": "box", "lambda": -1.0}},
    {"grid": {"nt": 0}},
    {"grid": {"nt": 2.5}},
    {"grid": {"T": 1.001}},
    {"boundary": {"A0": 0}},
    {"solver": {"tolerances": {"det": 2.0}}},
    {"spectrum": {"lambda_min": 1.0, "lambda_max": 0.0}},
    {"bogus": {}},
    {"grid": {"T": "abc"}},
    [1, 2],
])
def test_invalid_configs(mapping):
    with pytest.raises(ConfigError):
        RunConfig.from_mapping(mapping)


def test_unreadable_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid: [unclosed\n")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)


def test_csv_roundtrip(tmp_path):
    vals = np.array([0.1, 1 / 3, -2.5e-17])
    path = write_csv(tmp_path / "a.csv", "demo", ["k", "v", "tag"],
                     zip(range(3), vals, ["a", "b", "c"]))
    assert path.read_text().splitlines()[0] == "# mbrh-csv v1 demo"
    kind, cols = read_csv(path)
    assert kind == "demo"
    assert np.array_equal(cols["v"], vals)
    assert list(cols["tag"]) == ["a", "b", "c"]


def test_csv_rejects_foreign_files(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(p)
    p.write_text("# mbrh-csv v9 demo\na\n1\n")
    with pytest.raises(ValueError):
        read_csv(p)


def test_complex_columns():
    assert complex_columns("E") == ["re_E", "im_E"]


def test_json_complex_and_nonfinite(tmp_path):
    import json
    p = write_json(tmp_path / "d.json", {"z": 1 + 2j, "a": np.array([1.0, np.nan]),
                                         "n": np.int64(3), "b": np.bool_(True)})
    d = json.loads(p.read_text())
    assert d["z"] == {"re": 1.0, "im": 2.0}
    assert d["a"] == [1.0, "nan"] and d["n"] == 3 and d["b"] is True
