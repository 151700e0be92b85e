"""CSV tables, grid-function snapshots and run manifests.

CSV files use ',' separators, '.' decimals, LF line endings and a header row.
Floats are written with ``repr`` so they round-trip exactly.

A binary snapshot is one plain-text header line with five space-separated
fields followed by the values as little-endian float64 in C order::

    WLAB-SNAPSHOT <dim> <n0>x<n1> <L0>x<L1> <t>
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .discrete import Grid
from .errors import ValidationError

MAGIC = "WLAB-SNAPSHOT"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_cell(v) for v in row])
    return buf.getvalue()


def records_csv(records, columns: Sequence[str]) -> str:
    """CSV of dataclass records restricted to ``columns``."""
    rows = []
    for rec in records:
        d = asdict(rec) if is_dataclass(rec) else dict(rec)
        rows.append([d[c] for c in columns])
    return csv_text(columns, rows)


def write_text(path: Path, text: str):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- snapshots -----------------------------------------------------------------


def snapshot_csv(u: np.ndarray, grid: Grid) -> str:
    idx_cols = ["i", "j"][: grid.dim]
    rows = ([*ix, u[ix]] for ix in np.ndindex(*u.shape))
    return csv_text([*idx_cols, "value"], rows)


def write_snapshot(path, u: np.ndarray, grid: Grid, t: float):
    header = "{} {} {} {} {}\n".format(
        MAGIC,
        grid.dim,
        "x".join(str(n) for n in u.shape),
        "x".join(repr(float(e)) for e in grid.extent),
        repr(float(t)),
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(u, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[np.ndarray, Grid, float]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        data = fh.read()
    if len(header) != 5 or header[0] != MAGIC:
        raise ValidationError(f"{path}: not a snapshot file")
    dim = int(header[1])
    shape = tuple(int(n) for n in header[2].split("x"))
    extent = tuple(float(e) for e in header[3].split("x"))
    t = float(header[4])
    if len(shape) != dim or len(extent) != dim or len(set(shape)) != 1:
        raise ValidationError(f"{path}: inconsistent snapshot header")
    u = np.frombuffer(data, dtype="<f8")
    if u.size != int(np.prod(shape)):
        raise ValidationError(f"{path}: expected {int(np.prod(shape))} values, found {u.size}")
    return u.reshape(shape).astype(float), Grid(dim, extent, shape[0]), t


# -- manifest ------------------------------------------------------------------


def manifest_text(fields: dict) -> str:
    """``key: value`` lines in insertion order; list values are comma-joined."""
    lines = []
    for k, v in fields.items():
        if isinstance(v, (list, tuple)):
            v = ",".join(str(x) for x in v)
        lines.append(f"{k}: {v}")
    return "\n".join(lines) + "\n"


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, _, v = line.partition(": ")
            out[k] = v
    return out
