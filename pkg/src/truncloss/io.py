"""File formats: events CSV + sidecar JSON, threshold CSV, chain CSV, result JSON.

All CSVs are comma separated with a header row and ``.`` decimals; floats are
written with 15 significant digits.  Outputs are written to a temporary file
in the target directory and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .model import DomainError, EventTimes, ObservationWindow, ThresholdSchedule

__all__ = [
    "EVENTS_HEADER",
    "CHAIN_HEADER",
    "atomic_write_text",
    "dump_json",
    "parse_threshold_spec",
    "read_threshold_csv",
    "sidecar_path",
    "write_events",
    "read_events",
    "write_chain_csv",
    "read_chain_csv",
    "write_rows_csv",
]

EVENTS_HEADER = ("event_time", "loss")
CHAIN_HEADER = ("iter", "lambda", "alpha", "beta")
THRESHOLD_HEADER = ("year_index", "threshold")


def _fmt(v) -> str:
    return format(float(v), ".15g")


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path=None) -> str:
    text = json.dumps(_to_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        atomic_write_text(path, text)
    return text


def read_threshold_csv(path) -> ThresholdSchedule:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != THRESHOLD_HEADER:
        raise DomainError(f"{path}: expected header {','.join(THRESHOLD_HEADER)}")
    pairs = sorted((int(r[0]), float(r[1])) for r in rows[1:] if r)
    if [m for m, _ in pairs] != list(range(1, len(pairs) + 1)):
        raise DomainError(f"{path}: year_index must run 1..M without gaps")
    return ThresholdSchedule.piecewise([v for _, v in pairs])


def parse_threshold_spec(spec: str) -> ThresholdSchedule:
    """``constant:L``, ``exp:L0:r`` or ``file:path``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "constant":
            return ThresholdSchedule.constant(float(rest))
        if kind == "exp":
            l0, r = rest.split(":")
            return ThresholdSchedule.exponential(float(l0), float(r))
        if kind == "file":
            return read_threshold_csv(rest)
    except (ValueError, OSError) as e:
        raise DomainError(f"bad threshold spec {spec!r}: {e}") from None
    raise DomainError(f"bad threshold spec {spec!r}; use constant:L, exp:L0:r or file:path")


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_events(path, data: EventTimes, extra: dict | None = None):
    """Events CSV at ``path`` and the window/schedule sidecar JSON next to it."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENTS_HEADER)
    for t, x in zip(data.times, data.losses):
        w.writerow((_fmt(t), _fmt(x)))
    atomic_write_text(path, buf.getvalue())
    meta = {
        "format": "truncloss-events/1",
        "window": data.window.to_dict(),
        "schedule": data.schedule.to_dict(),
        "n_events": data.n_events,
    }
    if extra:
        meta.update(extra)
    dump_json(meta, sidecar_path(path))


def read_events(path, meta) -> EventTimes:
    """Load event data; ``meta`` is a dict or a path to the sidecar JSON.

    Raises ``ThresholdViolation`` whose ``index`` is the 0-based data row.
    """
    if not isinstance(meta, dict):
        with open(meta, encoding="utf-8") as fh:
            meta = json.load(fh)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != EVENTS_HEADER:
        raise DomainError(f"{path}: expected header {','.join(EVENTS_HEADER)}")
    body = [r for r in rows[1:] if r]
    t = np.array([float(r[0]) for r in body])
    x = np.array([float(r[1]) for r in body])
    window = ObservationWindow(**meta["window"])
    schedule = ThresholdSchedule.from_dict(meta["schedule"])
    return EventTimes(t, x, window, schedule)


def write_chain_csv(path, samples):
    samples = np.asarray(samples)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CHAIN_HEADER)
    for k, row in enumerate(samples):
        w.writerow((k, _fmt(row[0]), _fmt(row[1]), _fmt(row[2])))
    atomic_write_text(path, buf.getvalue())


def read_chain_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader([fh.readline()]))
        if tuple(c.strip() for c in header) != CHAIN_HEADER:
            raise DomainError(f"{path}: expected header {','.join(CHAIN_HEADER)}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise DomainError(f"{path}: empty chain")
    return data[:, 1:4]


def write_rows_csv(path, rows: list[dict], columns: list[str] | None = None):
    columns = columns or list(rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) if isinstance(r[c], (float, np.floating)) else r[c] for c in columns])
    atomic_write_text(path, buf.getvalue())
