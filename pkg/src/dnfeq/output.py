"""CSV writers and run manifests.

Numbers are written with 17 significant digits so every float64 survives a
write/read round trip.
"""

from __future__ import annotations

import csv
import hashlib
import math
from pathlib import Path

import numpy as np

FMT = "%.17g"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return FMT % v
    return str(v)


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_rows(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def coordinate_columns(domain):
    return [f"r{d}" for d in range(domain.dim)]


def write_equilibrium(path, domain, x, z) -> Path:
    header = coordinate_columns(domain) + ["x1", "x2", "z1", "z2"]
    rows = (
        list(domain.nodes[a]) + [x[0, a], x[1, a], z[0, a], z[1, a]]
        for a in range(domain.size)
    )
    return write_rows(path, header, rows)


def read_pair(path, columns=("z1", "z2")) -> np.ndarray:
    """Read two per-node columns (e.g. an equilibrium file) as a ``(2, N)`` pair."""
    header, rows = read_rows(path)
    try:
        idx = [header.index(c) for c in columns]
    except ValueError:
        raise ValueError(f"{path}: needs columns {list(columns)}, found {header}") from None
    return np.array([[float(row[i]) for row in rows] for i in idx])


def write_log(path, log) -> Path:
    return write_rows(path, ["iteration", "residual_Tcal", "step_norm"], log)


def write_summary(path, items) -> Path:
    return write_rows(path, ["key", "value"], list(items))


def write_trajectory(path, result) -> Path:
    n = result.z.shape[-1]
    header = ["time"] + [f"z1_{a}" for a in range(n)] + [f"z2_{a}" for a in range(n)]
    if result.y is not None:
        header += [f"y1_{a}" for a in range(n)]
    header += ["distance_to_reference", "z1_tracking_error"]
    rows = []
    for s, t in enumerate(result.times):
        row = [t, *result.z[s, 0], *result.z[s, 1]]
        if result.y is not None:
            row += list(result.y[s])
        row += [result.distance[s], result.tracking[s]]
        rows.append(row)
    return write_rows(path, header, rows)


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, command, config, seed, version, outputs) -> Path:
    """Record what produced the files in ``out_dir`` (no timestamps, so reruns match)."""
    rows = [
        ("command", command),
        ("config_sha256", config.digest()),
        ("config_source", Path(config.source).name if config.source else ""),
        ("seed", seed),
        ("version", version),
    ]
    for p in outputs:
        rows.append((f"output:{Path(p).name}", sha256(p)))
    return write_summary(Path(out_dir) / "manifest.csv", rows)
