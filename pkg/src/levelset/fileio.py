"""Binary and CSV storage for dense matrices and masked observations.

Matrix binary layout: ``b"LSMAT1"``, u64 rows, u64 cols, then row-major
little-endian f64.  Masked binary layout: ``b"LSMSK1"``, u64 rows, u64 cols,
u64 count, ``count`` (i, j) pairs as u64, then ``count`` f64 values.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

MATRIX_MAGIC = b"LSMAT1"
MASK_MAGIC = b"LSMSK1"


class FormatError(ValueError):
    pass


def write_matrix(path, matrix) -> None:
    m = np.array(matrix, dtype="<f8", ndmin=2)
    if m.ndim != 2:
        raise FormatError("only 1-D or 2-D arrays can be stored")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", *m.shape))
        fh.write(np.ascontiguousarray(m).tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:6] != MATRIX_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:6]!r}")
    rows, cols = struct.unpack_from("<QQ", data, 6)
    body = data[22:]
    if len(body) != 8 * rows * cols:
        raise FormatError(f"{path}: expected {rows * cols} values, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(float)


def write_matrix_csv(path, matrix) -> None:
    m = np.array(matrix, dtype=float, ndmin=2)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rows", "cols"])
        w.writerow(m.shape)
        for row in m:
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["rows", "cols"]:
        raise FormatError(f"{path}: missing 'rows,cols' header")
    r, c = (int(v) for v in rows[1])
    values = [float(v) for row in rows[2:] for v in row if v.strip()]
    if len(values) != r * c:
        raise FormatError(f"{path}: expected {r * c} values, found {len(values)}")
    return np.array(values, dtype=float).reshape(r, c)


def load_vector(path) -> np.ndarray:
    """Read a stored n x 1 (or 1 x n) matrix as a 1-D array."""
    reader = read_matrix_csv if str(path).endswith(".csv") else read_matrix
    m = reader(path)
    if 1 not in m.shape:
        raise FormatError(f"{path}: {m.shape} is not a vector")
    return m.ravel()


def save_vector(path, vec) -> None:
    writer = write_matrix_csv if str(path).endswith(".csv") else write_matrix
    writer(path, np.asarray(vec, dtype=float).reshape(-1, 1))


def write_masked(path, indices, values, shape) -> None:
    """Store observed entries; CSV when ``path`` ends in .csv, else binary."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 2)
    vals = np.asarray(values, dtype=float).ravel()
    if idx.shape[0] != vals.size:
        raise FormatError("index and value counts differ")
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "value"])
            for (i, j), v in zip(idx, vals):
                w.writerow([int(i), int(j), repr(float(v))])
        with open(str(path) + ".dims", "w") as fh:
            fh.write(f"rows,cols\n{shape[0]},{shape[1]}\n")
        return
    with open(path, "wb") as fh:
        fh.write(MASK_MAGIC)
        fh.write(struct.pack("<QQQ", shape[0], shape[1], idx.shape[0]))
        fh.write(idx.astype("<u8").tobytes())
        fh.write(vals.astype("<f8").tobytes())


def read_masked(path):
    """Inverse of :func:`write_masked`; returns ``(indices, values, shape)``."""
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [h.strip() for h in rows[0]] != ["i", "j", "value"]:
            raise FormatError(f"{path}: missing 'i,j,value' header")
        body = [r for r in rows[1:] if r]
        idx = np.array([[int(r[0]), int(r[1])] for r in body], dtype=np.int64).reshape(-1, 2)
        vals = np.array([float(r[2]) for r in body], dtype=float)
        with open(str(path) + ".dims") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        shape = tuple(int(v) for v in lines[-1].split(","))
        return idx, vals, shape
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:6] != MASK_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:6]!r}")
    r, c, count = struct.unpack_from("<QQQ", data, 6)
    off = 6 + 24
    if len(data) != off + 24 * count:
        raise FormatError(f"{path}: expected {count} entries, found {(len(data) - off) / 24:g}")
    idx = np.frombuffer(data, dtype="<u8", count=2 * count, offset=off).reshape(count, 2).astype(np.int64)
    vals = np.frombuffer(data, dtype="<f8", count=count, offset=off + 16 * count).astype(float)
    return idx, vals, (int(r), int(c))
