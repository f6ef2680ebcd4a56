"""Versioned CSV and JSON artifacts."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
HEADER_PREFIX = "# mbrh-csv"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path: str | Path, kind: str, columns: list[str], rows) -> Path:
    """Write ``rows`` under a ``# mbrh-csv v<version> <kind>`` comment line."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"{HEADER_PREFIX} v{SCHEMA_VERSION} {kind}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[str, dict[str, np.ndarray]]:
    """Return ``(kind, columns)``; numeric columns become float arrays."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().strip()
        if not first.startswith(HEADER_PREFIX):
            raise ValueError(f"{path} lacks the schema header")
        parts = first.split()
        if parts[2] != f"v{SCHEMA_VERSION}":
            raise ValueError(f"{path}: unsupported schema {parts[2]}")
        kind = parts[3] if len(parts) > 3 else ""
        reader = csv.reader(fh)
        header = next(reader)
        body = list(reader)
    cols = {}
    for i, name in enumerate(header):
        vals = [r[i] for r in body]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return kind, cols


def complex_columns(name: str) -> list[str]:
    return [f"re_{name}", f"im_{name}"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path
