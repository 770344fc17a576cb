"""Field files: CSV (``i,j,x1,x2,m1,m2,m3``) and the little-endian CSKF binary."""

import csv
import struct
from pathlib import Path

import numpy as np

from .grid_field import Grid, SpinField

MAGIC = b"CSKF"
VERSION = 1
_HEADER = struct.Struct("<4sIIdd")
CSV_HEADER = ["i", "j", "x1", "x2", "m1", "m2", "m3"]


def write_binary(f, path):
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, g.n, g.L, g.h))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_binary(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: file too short for a CSKF header")
    magic, version, n, L, h = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + n * n * 3 * 8
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n, n, 3).astype(np.float64)
    return SpinField(Grid(L, h, n), values.copy())


def write_csv(f, path):
    g = f.grid
    x = g.x
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for i in range(g.n):
            for j in range(g.n):
                m = f.values[i, j]
                w.writerow([i, j] + [f"{v:.17g}" for v in (x[i], x[j], m[0], m[1], m[2])])


def read_csv(path):
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    idx = raw[:, :2].astype(int)
    n = int(idx.max()) + 1
    if raw.shape[0] != n * n:
        raise ValueError(f"{path}: expected {n * n} rows, found {raw.shape[0]}")
    values = np.empty((n, n, 3))
    values[idx[:, 0], idx[:, 1]] = raw[:, 4:7]
    xs = np.empty(n)
    xs[idx[:, 0]] = raw[:, 2]
    L = float(-xs[0])
    return SpinField(Grid(L, 2.0 * L / (n - 1), n), values)


def write_field(f, path, fmt=None):
    fmt = fmt or guess_format(path)
    (write_csv if fmt == "csv" else write_binary)(f, path)


def read_field(path, fmt=None):
    fmt = fmt or guess_format(path)
    return read_csv(path) if fmt == "csv" else read_binary(path)


def guess_format(path):
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".cskf", ".bin", ""):
        return "binary"
    raise ValueError(f"cannot infer the field format of {path}; pass --format")


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])
