"""CSV and config-file input/output.

Series files have a mandatory header whose first two columns are
``time,value`` (``date``/``index`` and ``vol`` are accepted for volatility
series); optional ``sigma`` and ``jump_flag`` columns may follow. Numbers are
written with 17 significant digits so float64 values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .process_sim import ObservationSeries, PathSample

__all__ = [
    "SchemaError",
    "GridError",
    "SeriesTable",
    "fmt",
    "write_series_csv",
    "write_path_csv",
    "write_observations_csv",
    "write_jump_ledger",
    "read_series_csv",
    "read_jump_ledger",
    "check_equidistant",
    "to_observations",
    "read_config",
    "write_json",
]

TIME_NAMES = ("time", "date", "index")
VALUE_NAMES = ("value", "vol")


class SchemaError(ValueError):
    """Input file violates the CSV schema; ``line`` is 1-based."""

    def __init__(self, message: str, line: int, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line}: {message}")


class GridError(ValueError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_series_csv(path: str, times, values, sigma=None, jump_flag=None) -> None:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    cols = ["time", "value"]
    floats = [times, values]
    if sigma is not None:
        cols.append("sigma")
        floats.append(np.asarray(sigma, dtype=float))
    flags = None
    if jump_flag is not None:
        cols.append("jump_flag")
        flags = np.asarray(jump_flag, dtype=int)
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(times)):
            parts = [fmt(c[i]) for c in floats]
            if flags is not None:
                parts.append(str(int(flags[i])))
            fh.write(",".join(parts) + "\n")


def _jump_flags(p: PathSample) -> np.ndarray:
    flags = np.zeros(p.grid.n + 1, dtype=int)
    t = p.times
    for tau, _ in p.jumps:
        flags[int(np.searchsorted(t, tau, side="left"))] = 1
    return flags


def write_path_csv(path: str, p: PathSample) -> None:
    """Latent path: time, value (efficient log-price), sigma, jump_flag."""
    write_series_csv(path, p.times, p.x, p.sigma, _jump_flags(p))


def write_observations_csv(path: str, obs: ObservationSeries) -> None:
    write_series_csv(path, obs.times, obs.y)


def write_jump_ledger(path: str, jumps) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("time,size\n")
        for t, b in jumps:
            fh.write(f"{fmt(t)},{fmt(b)}\n")


def read_jump_ledger(path: str) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["time", "size"]:
        raise SchemaError("jump ledger header must be time,size", 1, path)
    for i, r in enumerate(rows[1:], start=2):
        try:
            out.append((float(r[0]), float(r[1])))
        except (ValueError, IndexError):
            raise SchemaError(f"bad ledger row {r!r}", i, path) from None
    return out


@dataclass
class SeriesTable:
    times: np.ndarray
    values: np.ndarray
    columns: list
    extra: dict = field(default_factory=dict)
    labels: Optional[list] = None  # raw date strings when the time column is non-numeric


def read_series_csv(path: str, numeric_time: bool = True) -> SeriesTable:
    """Parse a series file, reporting the offending line on any schema error.

    With ``numeric_time=False`` a ``date`` column may hold arbitrary labels;
    the series is then indexed 0, 1, 2, ...
    """
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as e:
        raise SchemaError(f"cannot open: {e.strerror}", 1, path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file; expected header time,value", 1, path) from None
        header = [h.strip().lower() for h in header]
        if len(header) < 2 or header[0] not in TIME_NAMES or header[1] not in VALUE_NAMES:
            raise SchemaError(f"header must start with time,value, got {','.join(header)}", 1, path)
        free_labels = not numeric_time and header[0] == "date"
        t, v, labels = [], [], []
        extra = {c: [] for c in header[2:]}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(f"expected {len(header)} fields, got {len(row)}", lineno, path)
            try:
                if free_labels:
                    labels.append(row[0].strip())
                    t.append(float(len(t)))
                else:
                    t.append(float(row[0]))
                v.append(float(row[1]))
                for c, cell in zip(header[2:], row[2:]):
                    extra[c].append(float(cell))
            except ValueError:
                raise SchemaError(f"non-numeric field in {row!r}", lineno, path) from None
            if not (math.isfinite(t[-1]) and math.isfinite(v[-1])):
                raise SchemaError("non-finite value", lineno, path)
            if len(t) > 1 and not t[-1] > t[-2]:
                raise SchemaError("times must be strictly increasing", lineno, path)
    if not t:
        raise SchemaError("no data rows", 2, path)
    return SeriesTable(np.array(t), np.array(v), header,
                       {c: np.array(x) for c, x in extra.items()},
                       labels if free_labels else None)


def check_equidistant(times, rtol: float = 1e-6) -> float:
    """Return the common spacing, or raise :class:`GridError`."""
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise GridError("need at least 3 observations")
    d = np.diff(times)
    dt = (times[-1] - times[0]) / (len(times) - 1)
    bad = np.flatnonzero(np.abs(d - dt) > rtol * dt)
    if bad.size:
        j = int(bad[0])
        raise GridError(
            f"non-equidistant grid: spacing {d[j]:.6g} between file lines {j + 2} and {j + 3} "
            f"(mean {dt:.6g}); resample before use"
        )
    return float(dt)


def to_observations(tbl: SeriesTable, source: Optional[str] = None) -> ObservationSeries:
    check_equidistant(tbl.times)
    return ObservationSeries(tbl.times, tbl.values, meta={"source": source} if source else {})


def read_config(path: str) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise SchemaError(f"cannot open config: {e.strerror}", 1, path) from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise SchemaError(f"expected key=value, got {s!r}", lineno, path)
            k, v = (p.strip() for p in s.split("=", 1))
            if not k:
                raise SchemaError("empty key", lineno, path)
            out[k.replace("-", "_")] = v
    return out


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path: str, obj) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, default=_jsonable)
        fh.write("\n")
