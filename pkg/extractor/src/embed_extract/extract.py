"""Batch extraction: TSV of (id, text) in, embedding matrix out.

Output row order equals input line order, and a manifest JSON recording the
model, pooling convention, and dimensions is written next to the matrix.
Answer texts for retrieval experiments use exactly the same TSV shape with
query ids in the first column; this tool only encodes text it is given and
never calls a generation API.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emb1 import write_emb1, write_jsonl
from .encoders import build_encoder


class InputError(ValueError):
    """The input TSV is malformed (bad line, duplicate or empty id)."""


@dataclass(frozen=True)
class ExtractJob:
    model_id: str
    input_path: str
    output_path: str
    batch_size: int = 32
    device: str = "cpu"
    output_format: str = "binary"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.output_format not in ("binary", "jsonl"):
            raise ValueError(f"unknown output format {self.output_format!r}")


def read_tsv(path: str | Path) -> tuple[list[str], list[str]]:
    """Parse (id, text) pairs; text keeps any further tab characters."""
    ids: list[str] = []
    texts: list[str] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise InputError(f"line {line_no}: expected 'id<TAB>text'")
            row_id, text = line.split("\t", 1)
            if not row_id:
                raise InputError(f"line {line_no}: empty id")
            if row_id in seen:
                raise InputError(f"line {line_no}: duplicate id {row_id!r}")
            seen.add(row_id)
            ids.append(row_id)
            texts.append(text)
    return ids, texts


def run_extract(job: ExtractJob) -> dict:
    """Encode every input row and write matrix + ids + manifest.

    Returns the manifest. An encoding failure aborts the job, reporting the
    id of the first row in the failing batch; no partial matrix is written.
    """
    encoder = build_encoder(job.model_id, device=job.device)
    ids, texts = read_tsv(job.input_path)

    blocks: list[np.ndarray] = []
    for start in range(0, len(texts), job.batch_size):
        batch_ids = ids[start : start + job.batch_size]
        batch_texts = texts[start : start + job.batch_size]
        try:
            block = encoder.encode(batch_texts)
        except Exception as exc:
            raise RuntimeError(
                f"encoding failed at row id {batch_ids[0]!r}: {exc}"
            ) from exc
        if block.shape != (len(batch_texts), encoder.dim):
            raise RuntimeError(
                f"encoder returned shape {block.shape} for batch at id "
                f"{batch_ids[0]!r}, expected ({len(batch_texts)}, {encoder.dim})"
            )
        blocks.append(block)

    data = (
        np.concatenate(blocks, axis=0)
        if blocks
        else np.empty((0, encoder.dim), dtype=np.float32)
    )
    output_path = Path(job.output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    if job.output_format == "binary":
        write_emb1(ids, data, output_path)
    else:
        write_jsonl(ids, data, output_path)

    manifest = {
        "model_id": job.model_id,
        "encoder_model": encoder.model_id,
        "pooling": encoder.pooling,
        "normalized": bool(getattr(encoder, "normalize", False)),
        "dim": encoder.dim,
        "rows": len(ids),
        "input": str(job.input_path),
        "output": str(output_path),
        "format": job.output_format,
        "batch_size": job.batch_size,
    }
    manifest_path = output_path.with_name(output_path.name + ".manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return manifest
