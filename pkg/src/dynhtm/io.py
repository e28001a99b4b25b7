"""File formats: CSV tables, JSON lines, and digests for manifests."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .dynsys import Trajectory
from .embedding import PointCloud, TimeSeries
from .errors import InvalidInputError


def fmt(v) -> str:
    """Round-trip-exact decimal text; integers stay integral."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_table(path: Path, header: list, rows, format: str = "csv") -> Path:
    """Write rows as CSV (``format='csv'``) or one JSON object per row (``'jsonl'``)."""
    path = Path(path)
    if format == "jsonl":
        path = path.with_suffix(".jsonl")
        with path.open("w", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps({h: _plain(v) for h, v in zip(header, row)}) + "\n")
        return path
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_jsonl(path: Path, records) -> Path:
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps({k: _plain(v) for k, v in rec.items()}) + "\n")
    return path


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def trajectory_rows(traj: Trajectory):
    for i, (x, y, z) in enumerate(traj.states):
        yield i, i * traj.dt, x, y, z


def series_rows(series: TimeSeries):
    for i, v in enumerate(series.values):
        yield i, i * series.dt, v


def write_trajectory(path, traj: Trajectory, format="csv") -> Path:
    return write_table(path, ["step", "t", "x", "y", "z"], trajectory_rows(traj), format)


def write_series(path, series: TimeSeries, format="csv") -> Path:
    return write_table(path, ["step", "t", "value"], series_rows(series), format)


def write_cloud(path, cloud: PointCloud, format="csv") -> Path:
    header = ["source_index"] + [f"c{j}" for j in range(cloud.k)]
    rows = ([int(s), *p] for s, p in zip(cloud.source_index, cloud.points))
    return write_table(path, header, rows, format)


def read_series(path) -> TimeSeries:
    """Read a ``step,t,value`` table (CSV or JSON lines); ``dt`` comes from the first two rows."""
    path = Path(path)
    if path.suffix == ".jsonl":
        rows = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
        steps = [int(r["step"]) for r in rows]
        times = [float(r["t"]) for r in rows]
        values = [float(r["value"]) for r in rows]
    else:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"step", "t", "value"} <= set(reader.fieldnames):
                raise InvalidInputError(f"{path}: expected columns step,t,value")
            steps, times, values = [], [], []
            for r in reader:
                steps.append(int(r["step"]))
                times.append(float(r["t"]))
                values.append(float(r["value"]))
    if not values:
        raise InvalidInputError(f"{path}: no data rows")
    if steps != list(range(len(steps))):
        raise InvalidInputError(f"{path}: steps must run 0, 1, 2, ...")
    dt = times[1] - times[0] if len(times) > 1 else 1.0
    return TimeSeries(dt, np.asarray(values))
