"""Diagnostics CSV and ASF1 binary snapshots.

ASF1 layout (little-endian): magic ``ASF1``; u32 n_dims; u64 points per
axis; f64 side length per axis; f64 simulation time; f64 values row-major.
The grid origin is not stored; readers get the box centre.
"""
from __future__ import annotations

import csv
import math
import struct
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import DiagnosticsRecord
from .errors import GridError, SnapshotError
from .spectral import Grid, ScalarField, make_grid

MAGIC = b"ASF1"
CSV_HEADER = DiagnosticsRecord.FIELDS


def format_float(x: float) -> str:
    """17 significant digits; enough to round-trip any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_diagnostics_csv(records: Iterable[DiagnosticsRecord], path: str) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow([format_float(v) for v in rec.as_row()])
    return path


def read_diagnostics_csv(path: str) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected diagnostics header {header}")
        return [DiagnosticsRecord(*(float(v) for v in row)) for row in reader if row]


def write_snapshot(f: ScalarField, t: float, path: str) -> str:
    grid = f.grid
    n = grid.n_dims
    head = MAGIC + struct.pack(f"<I{n}Q{n}dd", n, *grid.points, *grid.side_length, float(t))
    values = np.ascontiguousarray(f.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(values.tobytes(order="C"))
    return path


def read_snapshot(path: str, expect: Grid | None = None) -> tuple[ScalarField, float]:
    """Return (field, time); ``expect`` makes a grid mismatch an error."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise SnapshotError(f"{path}: magic mismatch (got {data[:4]!r}, expected {MAGIC!r})")
    pos = 4
    if len(data) < pos + 4:
        raise SnapshotError(f"{path}: truncated header")
    (n,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if n not in (2, 3):
        raise SnapshotError(f"{path}: dimension mismatch, header declares n_dims={n}")
    need = pos + 8 * n + 8 * n + 8
    if len(data) < need:
        raise SnapshotError(f"{path}: truncated header")
    points = struct.unpack_from(f"<{n}Q", data, pos)
    pos += 8 * n
    sides = struct.unpack_from(f"<{n}d", data, pos)
    pos += 8 * n
    (t,) = struct.unpack_from("<d", data, pos)
    pos += 8
    count = int(np.prod(points))
    payload = len(data) - pos
    if payload < 8 * count:
        raise SnapshotError(
            f"{path}: truncated payload ({payload} bytes, expected {8 * count})")
    if payload > 8 * count:
        raise SnapshotError(
            f"{path}: dimension mismatch, {payload} payload bytes for {count} values")
    try:
        grid = make_grid(n, list(points), list(sides))
    except GridError as exc:
        raise SnapshotError(f"{path}: invalid grid in header: {exc}") from exc
    if expect is not None and (expect.points != grid.points
                               or expect.side_length != grid.side_length):
        raise SnapshotError(
            f"{path}: dimension mismatch, file grid {grid.points} / {grid.side_length} "
            f"vs expected {expect.points} / {expect.side_length}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(grid.shape)
    return ScalarField(grid, values=values.astype(float)), t


def snapshot_name(prefix: str, t: float, index: int) -> str:
    return f"{prefix}snapshot_{index:06d}.asf"


__all__ = ["MAGIC", "CSV_HEADER", "format_float", "write_diagnostics_csv",
           "read_diagnostics_csv", "write_snapshot", "read_snapshot", "snapshot_name"]
