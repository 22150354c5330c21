"""Writers for the embedding-file formats the retrieval toolkit reads.

EMB1 wire format: magic bytes ``EMB1``, little-endian uint32 row count and
dimension, then row-major little-endian float32 values; ids go to a
``<path>.ids`` sidecar, one per line in row order.  JSONL: one
``{"id": ..., "vector": [...]}`` object per line.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


def write_emb1(ids: Sequence[str], data: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    matrix = np.ascontiguousarray(data, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={matrix.ndim}")
    if len(ids) != matrix.shape[0]:
        raise ValueError(f"{len(ids)} ids for {matrix.shape[0]} rows")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix contains NaN or Inf entries")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, matrix.shape[0], matrix.shape[1]))
        f.write(matrix.tobytes(order="C"))
    with open(path.with_name(path.name + ".ids"), "w", encoding="utf-8") as f:
        for row_id in ids:
            f.write(row_id + "\n")


def write_jsonl(ids: Sequence[str], data: np.ndarray, path: str | Path) -> None:
    matrix = np.ascontiguousarray(data, dtype=np.float32)
    with open(path, "w", encoding="utf-8") as f:
        for row_id, row in zip(ids, matrix):
            f.write(json.dumps({"id": row_id, "vector": [float(v) for v in row]}) + "\n")
