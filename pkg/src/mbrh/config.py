"""Run configuration: YAML ingestion and validation."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

DEFAULTS: dict = {
    "boundary": {"A0": 1.0, "omega0": 1.0},
    "broadening": {"type": "box", "lambda": 1.0},
    "grid": {"T": 2.0, "L": 1.0, "nt": 8, "nx": 8, "nlambda": 64},
    "solver": {
        "nodes_per_piece": 128,
        "truncation_radius": 1.0e4,
        "probe_count": 10,
        "densities": False,
        "tolerances": {"jump_residual": 1e-6, "det": 1e-8, "causality": 1e-8,
                       "normalization": 1e-6},
    },
    "oracle": {"delta": 1.0 / 256, "output_stride": 8, "iterations": 3},
    "spectrum": {"lambda_min": -5.0, "lambda_max": 5.0, "n": 201},
    "phase": {"xi": 3.0, "resolution": 200},
    "plot": {"t": 2.0, "x": 0.5, "signature_n": 200, "signature_extent": 4.0},
    "outputs": {"directory": "out", "formats": ["csv", "json"]},
}


class ConfigError(ValueError):
    """Invalid or unreadable configuration (exit status 2)."""


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __getitem__(self, key):
        return self.data[key]

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, mapping: dict | None) -> "RunConfig":
        if mapping is None:
            mapping = {}
        if not isinstance(mapping, dict):
            raise ConfigError("config root must be a mapping")
        unknown = set(mapping) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls(_merge(DEFAULTS, mapping))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls.from_mapping({})
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            mapping = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
        return cls.from_mapping(mapping)

    def validate(self) -> None:
        d = self.data
        try:
            b, g, s, o = d["boundary"], d["grid"], d["solver"], d["oracle"]
            _pos(b, "A0", "boundary")
            _pos(b, "omega0", "boundary")
            for k in ("T", "L"):
                _pos(g, k, "grid")
            for k in ("nt", "nx", "nlambda"):
                _count(g, k, "grid")
            for k in ("nodes_per_piece", "probe_count"):
                _count(s, k, "solver")
            _pos(s, "truncation_radius", "solver")
            for k, v in s["tolerances"].items():
                if not 0 < float(v) < 1:
                    raise ConfigError(f"solver.tolerances.{k} must lie in (0, 1)")
            _pos(o, "delta", "oracle")
            _count(o, "output_stride", "oracle")
            _count(o, "iterations", "oracle")
            for ext in ("T", "L"):
                n = float(g[ext]) / float(o["delta"])
                if abs(n - round(n)) > 1e-9 * n:
                    raise ConfigError(f"grid.{ext} must be a multiple of oracle.delta")
            br = d["broadening"]
            if not isinstance(br, dict):
                raise ConfigError("broadening must be a mapping")
            if "lambda" in br and not float(br["lambda"]) > 0:
                raise ConfigError("broadening.lambda must be positive")
            sp = d["spectrum"]
            if not float(sp["lambda_min"]) < float(sp["lambda_max"]):
                raise ConfigError("spectrum.lambda_min must be below lambda_max")
            _count(sp, "n", "spectrum")
            _pos(d["phase"], "xi", "phase")
            _count(d["phase"], "resolution", "phase")
            pl = d["plot"]
            _count(pl, "signature_n", "plot")
            _pos(pl, "signature_extent", "plot")
            if float(pl["t"]) < 0 or float(pl["x"]) < 0:
                raise ConfigError("plot.t and plot.x must be nonnegative")
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config value: {exc}") from exc


def _pos(sec: dict, key: str, name: str) -> None:
    if not float(sec[key]) > 0:
        raise ConfigError(f"{name}.{key} must be positive")


def _count(sec: dict, key: str, name: str) -> None:
    v = sec[key]
    if isinstance(v, bool) or int(v) != v or int(v) <= 0:
        raise ConfigError(f"{name}.{key} must be a positive integer")
