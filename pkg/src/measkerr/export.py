"""CSV and JSON writers shared by the command-line recipes.

Floats are written with 17 significant digits so a value survives a round
trip bit for bit; identical inputs therefore give byte-identical CSV files.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def sidecar(csv_path, config: dict, wall_time: float, extra: dict | None = None) -> Path:
    """Metadata next to a CSV: config echo, package version, wall time."""
    payload = {"config": config, "version": __version__, "wall_time_s": wall_time,
               "data": Path(csv_path).name}
    if extra:
        payload.update(extra)
    return write_json(Path(csv_path).with_suffix(".json"), payload)


def write_qfi_report(path, report) -> Path:
    return write_csv(path, report.columns, report.rows())


def write_wigner(path, q, p, W, meta: dict | None = None) -> tuple[Path, Path]:
    """Long-format (q, p, W) CSV plus a JSON envelope holding the grid itself."""
    rows = ((qi, pj, W[i, j]) for i, qi in enumerate(q) for j, pj in enumerate(p))
    csv_path = write_csv(path, ("q", "p", "W"), rows)
    env = {"q_range": [float(q[0]), float(q[-1])], "p_range": [float(p[0]), float(p[-1])],
           "resolution": [len(q), len(p)], "W_index_order": "W[iq][ip]",
           "q": q, "p": p, "W": W}
    if meta:
        env["metadata"] = meta
    json_path = write_json(Path(path).with_name(Path(path).stem + "_grid.json"), env)
    return csv_path, json_path
