"""Bit-exact reading and writing of embedding matrices, label vectors, and JSON config.

Binary formats (all little-endian):

  embeddings ("OODE"): magic 4 bytes, version u32 = 1, n u64, d u64,
      then n*d IEEE-754 float32 values, row-major.
  labels     ("OODL"): magic 4 bytes, version u32 = 1, n u64,
      then n u32 values.

Files with a ``.csv`` extension fall back to plain CSV (comma-separated,
one row per line, no header); a CSV load must produce a matrix identical
to the equivalent binary file.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    EmptyMatrixError,
    EmptyVectorError,
    LengthMismatchError,
    NonFiniteValueError,
    TruncatedFileError,
)

EMBEDDING_MAGIC = b"OODE"
LABEL_MAGIC = b"OODL"
FORMAT_VERSION = 1

_EMBED_HEADER = struct.Struct("<4sIQQ")  # magic, version, n, d -> 24 bytes
_LABEL_HEADER = struct.Struct("<4sIQ")   # magic, version, n    -> 16 bytes


def validate_embeddings(data: np.ndarray) -> np.ndarray:
    """Check matrix invariants and return a float32 C-contiguous view/copy.

    Raises EmptyMatrixError on a zero-sized axis and NonFiniteValueError
    (with row/col) on the first NaN/Inf encountered.
    """
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise EmptyMatrixError(f"expected a 2-d matrix, got ndim={arr.ndim}")
    n, d = arr.shape
    if n < 1 or d < 1:
        raise EmptyMatrixError(f"matrix shape {n}x{d} has an empty axis")
    finite = np.isfinite(arr)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        raise NonFiniteValueError(int(row), int(col))
    return arr


def validate_labels(labels: np.ndarray, matrix: np.ndarray | None = None) -> np.ndarray:
    """Check label-vector invariants; optionally against a companion matrix."""
    arr = np.ascontiguousarray(labels, dtype=np.int64).reshape(-1)
    if arr.size == 0:
        raise EmptyVectorError("label vector is empty")
    if (arr < 0).any():
        bad = int(arr[arr < 0][0])
        raise ValueError(f"labels must be non-negative, found {bad}")
    if matrix is not None and arr.size != matrix.shape[0]:
        raise LengthMismatchError(
            f"{arr.size} labels for a matrix of {matrix.shape[0]} rows"
        )
    return arr


def save_embeddings(matrix: np.ndarray, path: str | Path) -> None:
    """Write an embedding matrix; load_embeddings(path) reproduces it bit-exactly."""
    arr = validate_embeddings(matrix)
    n, d = arr.shape
    with open(path, "wb") as fh:
        fh.write(_EMBED_HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, n, d))
        fh.write(arr.tobytes())


def load_embeddings(path: str | Path) -> np.ndarray:
    """Read an OODE file (or .csv fallback) into an n x d float32 matrix."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_csv_matrix(path)
    raw = path.read_bytes()
    if len(raw) < _EMBED_HEADER.size:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes is shorter than the header")
    magic, version, n, d = _EMBED_HEADER.unpack_from(raw)
    if magic != EMBEDDING_MAGIC:
        raise BadMagicError(f"{path}: expected {EMBEDDING_MAGIC!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise BadMagicError(f"{path}: unsupported version {version}")
    if n == 0 or d == 0:
        raise EmptyMatrixError(f"{path}: header declares {n}x{d}")
    expected = _EMBED_HEADER.size + 4 * n * d
    if len(raw) != expected:
        raise TruncatedFileError(
            f"{path}: header promises {expected} bytes, file has {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4", count=n * d, offset=_EMBED_HEADER.size)
    return validate_embeddings(data.reshape(n, d))


def save_labels(labels: np.ndarray, path: str | Path) -> None:
    """Write a label vector; round-trips exactly through load_labels."""
    arr = validate_labels(labels)
    if (arr > 0xFFFFFFFF).any():
        raise ValueError("labels exceed the u32 range of the OODL format")
    with open(path, "wb") as fh:
        fh.write(_LABEL_HEADER.pack(LABEL_MAGIC, FORMAT_VERSION, arr.size))
        fh.write(arr.astype("<u4").tobytes())


def load_labels(path: str | Path) -> np.ndarray:
    """Read an OODL file (or .csv fallback) into an int64 label vector."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_csv_labels(path)
    raw = path.read_bytes()
    if len(raw) < _LABEL_HEADER.size:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes is shorter than the header")
    magic, version, n = _LABEL_HEADER.unpack_from(raw)
    if magic != LABEL_MAGIC:
        raise BadMagicError(f"{path}: expected {LABEL_MAGIC!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise BadMagicError(f"{path}: unsupported version {version}")
    if n == 0:
        raise EmptyVectorError(f"{path}: header declares 0 labels")
    expected = _LABEL_HEADER.size + 4 * n
    if len(raw) != expected:
        raise TruncatedFileError(
            f"{path}: header promises {expected} bytes, file has {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<u4", count=n, offset=_LABEL_HEADER.size)
    return data.astype(np.int64)


def _load_csv_matrix(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            values = [float(tok) for tok in line.split(",")]
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise TruncatedFileError(
                    f"{path}:{lineno}: row has {len(values)} values, expected {width}"
                )
            rows.append(values)
    if not rows:
        raise EmptyMatrixError(f"{path}: no rows")
    return validate_embeddings(np.asarray(rows, dtype=np.float32))


def _load_csv_labels(path: Path) -> np.ndarray:
    values: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            values.extend(int(tok) for tok in line.split(","))
    if not values:
        raise EmptyVectorError(f"{path}: no labels")
    return validate_labels(np.asarray(values, dtype=np.int64))


def save_embeddings_csv(matrix: np.ndarray, path: str | Path) -> None:
    """CSV counterpart of save_embeddings (repr-exact float32 text)."""
    arr = validate_embeddings(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_config(path: str | Path) -> dict:
    """Read a JSON config document whose keys mirror CLI flag names."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc
