"""Embedding storage: validated in-memory matrices plus two on-disk formats.

Binary format ("EMB1"): magic bytes ``EMB1``, little-endian uint32 row count
``n``, little-endian uint32 dimension ``d``, then ``n * d`` little-endian
float32 values in row-major order.  Document ids live in a sidecar file at
``<path>.ids`` holding ``n`` newline-delimited UTF-8 ids, one per row, in row
order.  The binary roundtrip is bitwise lossless for every finite float32.

JSONL format: one object per line with keys ``id`` (string) and ``vector``
(array of numbers).  Intended for small, human-editable test fixtures only.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")

FORMATS = ("binary", "jsonl")


class StoreFormatError(ValueError):
    """Base class for embedding-file format violations."""


class MalformedHeaderError(StoreFormatError):
    """Binary header is missing, truncated, or inconsistent with the payload."""


class MalformedRecordError(StoreFormatError):
    """A JSONL line is not a valid embedding record."""


class DimensionMismatchError(StoreFormatError):
    """Rows disagree on dimension, or the dimension is not a positive integer."""


class DuplicateIdError(StoreFormatError):
    """The same document id appears on more than one row."""


class NonFiniteValueError(StoreFormatError):
    """An embedding contains NaN or infinite entries."""


class IdSidecarError(StoreFormatError):
    """The .ids sidecar is missing or does not match the matrix row count."""


def _validate_ids(ids: Sequence[str]) -> tuple[str, ...]:
    out = tuple(ids)
    seen: set[str] = set()
    for i, doc_id in enumerate(out):
        if not isinstance(doc_id, str) or not doc_id:
            raise MalformedRecordError(f"row {i}: id must be a non-empty string")
        if "\n" in doc_id or "\r" in doc_id:
            # newlines are the sidecar record separator and cannot be encoded
            raise MalformedRecordError(f"row {i}: id may not contain newlines")
        if doc_id in seen:
            raise DuplicateIdError(f"duplicate id {doc_id!r} at row {i}")
        seen.add(doc_id)
    return out


@dataclass(frozen=True)
class EmbeddingMatrix:
    """An id-indexed ``n x d`` float32 matrix, immutable after construction."""

    ids: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-D array, got ndim={data.ndim}")
        if data.shape[1] < 1:
            raise DimensionMismatchError("dimension must be >= 1")
        ids = _validate_ids(self.ids)
        if len(ids) != data.shape[0]:
            raise IdSidecarError(
                f"{len(ids)} ids for {data.shape[0]} rows"
            )
        if not np.all(np.isfinite(data)):
            raise NonFiniteValueError("matrix contains NaN or Inf entries")
        data.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @cached_property
    def _index(self) -> dict[str, int]:
        return {doc_id: i for i, doc_id in enumerate(self.ids)}

    @cached_property
    def ids_array(self) -> np.ndarray:
        return np.asarray(self.ids, dtype=object)

    @cached_property
    def data64(self) -> np.ndarray:
        """Float64 copy used by all scoring paths; cached, read-only."""
        wide = self.data.astype(np.float64)
        wide.setflags(write=False)
        return wide

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._index

    def row_index(self, doc_id: str) -> int:
        try:
            return self._index[doc_id]
        except KeyError:
            raise KeyError(f"unknown document id {doc_id!r}") from None

    def row(self, doc_id: str) -> np.ndarray:
        return self.data[self.row_index(doc_id)]

    def rows(self, doc_ids: Iterable[str]) -> np.ndarray:
        idx = [self.row_index(d) for d in doc_ids]
        return self.data[idx]


def as_embedding(values, dim: int | None = None) -> np.ndarray:
    """Validate a single embedding vector and return it as float32."""
    vec = np.ascontiguousarray(values, dtype=np.float32)
    if vec.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-D vector, got ndim={vec.ndim}")
    if vec.shape[0] < 1:
        raise DimensionMismatchError("embedding must have at least one entry")
    if dim is not None and vec.shape[0] != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)):
        raise NonFiniteValueError("embedding contains NaN or Inf entries")
    return vec


def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")


def save_matrix(matrix: EmbeddingMatrix, path: str | Path, fmt: str = "binary") -> None:
    _check_format(fmt)
    path = Path(path)
    if fmt == "binary":
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, matrix.n, matrix.dim))
            f.write(matrix.data.astype("<f4", copy=False).tobytes(order="C"))
        with open(_ids_path(path), "w", encoding="utf-8") as f:
            for doc_id in matrix.ids:
                f.write(doc_id + "\n")
    else:
        with open(path, "w", encoding="utf-8") as f:
            for doc_id, row in zip(matrix.ids, matrix.data):
                record = {"id": doc_id, "vector": [float(v) for v in row]}
                f.write(json.dumps(record) + "\n")


def load_matrix(path: str | Path, fmt: str = "binary") -> EmbeddingMatrix:
    _check_format(fmt)
    path = Path(path)
    if fmt == "binary":
        return _load_binary(path)
    return _load_jsonl(path)


def _ids_path(path: Path) -> Path:
    return path.with_name(path.name + ".ids")


def _load_binary(path: Path) -> EmbeddingMatrix:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise MalformedHeaderError(f"{path}: file shorter than the header")
    magic, n, dim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic bytes {magic!r}")
    if dim < 1:
        raise DimensionMismatchError(f"{path}: header dimension must be >= 1")
    expected = _HEADER.size + 4 * n * dim
    if len(raw) != expected:
        raise MalformedHeaderError(
            f"{path}: expected {expected} bytes for n={n} d={dim}, found {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, dim)

    ids_file = _ids_path(path)
    if not ids_file.exists():
        raise IdSidecarError(f"missing ids sidecar {ids_file}")
    text = ids_file.read_text(encoding="utf-8")
    ids = text.split("\n")[:-1] if text.endswith("\n") else text.split("\n")
    if text == "":
        ids = []
    if len(ids) != n:
        raise IdSidecarError(f"{ids_file}: {len(ids)} ids for n={n} rows")
    return EmbeddingMatrix(ids=tuple(ids), data=data)


def _load_jsonl(path: Path) -> EmbeddingMatrix:
    ids: list[str] = []
    rows: list[list[float]] = []
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(f"{path}:{line_no}: invalid JSON ({exc})") from None
            if not isinstance(record, dict) or "id" not in record or "vector" not in record:
                raise MalformedRecordError(
                    f"{path}:{line_no}: record must be an object with 'id' and 'vector'"
                )
            vector = record["vector"]
            if not isinstance(vector, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in vector
            ):
                raise MalformedRecordError(f"{path}:{line_no}: 'vector' must be a list of numbers")
            if dim is None:
                dim = len(vector)
                if dim < 1:
                    raise DimensionMismatchError(f"{path}:{line_no}: empty vector")
            elif len(vector) != dim:
                raise DimensionMismatchError(
                    f"{path}:{line_no}: vector length {len(vector)} != {dim}"
                )
            ids.append(record["id"])
            rows.append(vector)
    if dim is None:
        raise DimensionMismatchError(f"{path}: empty JSONL file, dimension unknown")
    return EmbeddingMatrix(ids=tuple(ids), data=np.asarray(rows, dtype=np.float32))


def save_embedding(
    values, path: str | Path, fmt: str = "binary", embedding_id: str = "embedding"
) -> None:
    """Persist a single embedding as a one-row matrix."""
    vec = as_embedding(values)
    save_matrix(EmbeddingMatrix(ids=(embedding_id,), data=vec[None, :]), path, fmt)


def load_embedding(path: str | Path, fmt: str = "binary") -> np.ndarray:
    """Load a single embedding saved with :func:`save_embedding`."""
    matrix = load_matrix(path, fmt)
    if matrix.n != 1:
        raise MalformedHeaderError(f"{path}: expected a single row, found {matrix.n}")
    return matrix.data[0]
