"""CSV/JSON serialisation of boundary data, radial curves and traces."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    # + 0.0 folds negative zero
    return f"{float(x) + 0.0:.9g}"


def write_columns(path, header: Sequence[str], columns: Sequence[Sequence[float]],
                  int_columns: Sequence[int] = ()) -> Path:
    """Write equal-length columns as CSV; floats get 9 significant digits, strings pass through."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("columns differ in length")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([str(int(c[i])) if j in int_columns else _fmt(c[i])
                        for j, c in enumerate(columns)])
    return path


def write_phi(path, phi) -> Path:
    phi = np.asarray(phi, dtype=float)
    return write_columns(path, ["m", "phi"], [np.arange(1, phi.size + 1), phi], int_columns=[0])


def read_phi(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"m", "phi"}:
        raise ValueError(f"{path}: expected header 'm,phi'")
    modes = [int(r["m"]) for r in rows]
    if modes != list(range(1, len(rows) + 1)):
        raise ValueError(f"{path}: modes must run 1..M in order")
    return np.array([float(r["phi"]) for r in rows])


def write_curve(path, r, eta) -> Path:
    return write_columns(path, ["r", "eta"], [r, eta])


def read_curve(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_matrix(path) -> np.ndarray:
    """Whitespace- or comma-separated square matrix, one row per line."""
    text = Path(path).read_text().replace(",", " ")
    rows = [[float(v) for v in line.split()] for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")]
    return np.array(rows, dtype=float)
