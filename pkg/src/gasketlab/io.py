"""Plain CSV / JSON / Matrix Market writers for experiment artifacts."""

from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import io as spio

SCHEMA_VERSION = "1.0"


def _plain(obj):
    """Recursively convert numpy scalars/arrays and fractions into JSON-able values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else _plain(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_matrix(path, matrix) -> Path:
    """Coordinate-format sparse matrix (Matrix Market)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    spio.mmwrite(str(path), matrix.tocoo(), precision=17)
    return path


def write_result(result, out_dir) -> dict:
    """Write tables, arrays and ``summary.json`` for one experiment; return the file map."""
    out = Path(out_dir) / result.kind
    files = {}
    for name, (header, rows) in result.tables.items():
        files[name] = str(write_csv(out / f"{name}.csv", header, rows))
    for name, M in result.arrays.items():
        files[name] = str(write_matrix(out / f"{name}.mtx", M))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": result.kind,
        "passed": result.passed,
        "checks": result.checks,
        "results": result.summary,
    }
    files["summary"] = str(write_json(out / "summary.json", summary))
    # wall-clock numbers are kept apart so that the other artifacts reproduce byte for byte
    if result.timings:
        files["timing"] = str(write_json(out / "timing.json", result.timings))
    return files
