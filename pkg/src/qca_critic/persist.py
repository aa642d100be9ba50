"""File formats: phase diagrams, critical lines, manifests and safe text I/O.

Floats are written with 17 significant digits everywhere so that every file
re-parses to the identical in-memory value.  JSON is written with sorted
keys and a trailing newline so equal content means equal bytes.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataIOError
from .meanfield import CriticalRecord, PhaseDiagram
from .series import TimeSeries, format_float

__all__ = [
    "to_plain",
    "dumps",
    "write_text",
    "read_text",
    "read_json",
    "provenance",
    "point_dirname",
    "phase_diagram_to_json",
    "phase_diagram_from_json",
    "phase_diagram_to_csv",
    "phase_diagram_from_csv",
    "critical_line_to_json",
    "critical_line_from_json",
    "read_series",
]

PACKAGE = "qca-critic"


def to_plain(obj):
    """Recursively convert numpy scalars/arrays and tuples into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj):
    # json uses repr() for floats, which is already the shortest exact round trip
    return json.dumps(to_plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_text(path):
    try:
        with open(path, newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc.strerror or exc}") from exc


def read_json(path):
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise DataIOError(f"{path} is not valid JSON: {exc}") from exc


def read_series(path) -> TimeSeries:
    try:
        return TimeSeries.from_csv(read_text(path))
    except (ValueError, IndexError) as exc:
        raise DataIOError(f"{path} is not a time-series CSV: {exc}") from exc


def _timestamp():
    """UTC ISO time; ``SOURCE_DATE_EPOCH`` pins it for reproducible trees."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch and epoch.strip().isdigit() else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def provenance(command, parameters):
    return {
        "package": PACKAGE,
        "version": __version__,
        "command": command,
        "parameters": to_plain(parameters),
        "created": _timestamp(),
    }


def point_dirname(name, value):
    """``p1=0.25`` style directory component; ``repr`` keeps it exact and stable."""
    return f"{name}={float(value)!r}"


def phase_diagram_to_json(diagram: PhaseDiagram):
    return dumps({
        "p1_grid": diagram.p1_grid,
        "p2_grid": diagram.p2_grid,
        "n_stationary": diagram.n_stationary.ravel(order="C"),
        "shape": list(diagram.n_stationary.shape),
        "meta": diagram.meta,
    })


def phase_diagram_from_json(text) -> PhaseDiagram:
    d = json.loads(text)
    n = np.array(d["n_stationary"], dtype=float).reshape(d["shape"])
    return PhaseDiagram(d["p1_grid"], d["p2_grid"], n, d.get("meta", {}))


def phase_diagram_to_csv(diagram: PhaseDiagram):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p1", "p2", "n_star"])
    for i, p1 in enumerate(diagram.p1_grid):
        for j, p2 in enumerate(diagram.p2_grid):
            w.writerow([format_float(p1), format_float(p2), format_float(diagram.n_stationary[i, j])])
    return buf.getvalue()


def phase_diagram_from_csv(text) -> PhaseDiagram:
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0] != ["p1", "p2", "n_star"]:
        raise DataIOError(f"unexpected phase-diagram header {rows[0]}")
    vals = np.array([[float(x) for x in r] for r in rows[1:] if r])
    p1 = np.unique(vals[:, 0])
    p2 = np.unique(vals[:, 1])
    if len(vals) != len(p1) * len(p2):
        raise DataIOError("phase-diagram CSV is not a full grid")
    return PhaseDiagram(p1, p2, vals[:, 2].reshape(len(p1), len(p2)))


def critical_line_to_json(records, boundary=None, extra=None):
    body = {"records": [asdict(r) for r in records], "order_boundary": boundary}
    if extra:
        body.update(extra)
    return dumps(body)


def critical_line_from_json(text):
    d = json.loads(text)
    return [CriticalRecord(**r) for r in d["records"]], d.get("order_boundary")
