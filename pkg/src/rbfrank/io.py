"""File formats shared by plans, point clouds and CLI outputs.

Binary matrices: a 16-byte little-endian header (magic ``RBFK``, version u32,
rows u32, cols u32) followed by row-major float64 entries.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConstraintError

MAGIC = b"RBFK"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_matrix_binary(path, matrix: np.ndarray) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    if matrix.ndim != 2:
        raise ConstraintError("binary export needs a 2-D matrix")
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, BINARY_VERSION, rows, cols))
        fh.write(matrix.tobytes(order="C"))


def read_matrix_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConstraintError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConstraintError(f"{path}: bad magic {magic!r}")
    if version != BINARY_VERSION:
        raise ConstraintError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size:]
    if len(body) != rows * cols * 8:
        raise ConstraintError(f"{path}: expected {rows * cols * 8} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def write_matrix_csv(path, matrix: np.ndarray, header: Optional[Sequence[str]] = None) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    width = 0
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            try:
                rows.append([float(v) for v in fields])
            except ValueError:
                if rows:
                    raise
                width = len(fields)  # header row; keeps the shape of an empty matrix
    if not rows:
        return np.zeros((0, width))
    return np.asarray(rows, dtype=np.float64)


def read_matrix(path) -> np.ndarray:
    """Load a matrix from ``.bin`` (RBFK), ``.npy`` or CSV, by extension."""
    path = Path(path)
    if path.suffix == ".bin":
        return read_matrix_binary(path)
    if path.suffix == ".npy":
        return np.load(path)
    return read_matrix_csv(path)


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")
