"""Batch text-to-embedding extraction for the dimension-selection toolkit."""

from .emb1 import write_emb1, write_jsonl
from .encoders import REGISTRY, HashingEncoder, build_encoder, documented_width
from .extract import ExtractJob, InputError, read_tsv, run_extract

__all__ = [
    "ExtractJob",
    "HashingEncoder",
    "InputError",
    "REGISTRY",
    "build_encoder",
    "documented_width",
    "read_tsv",
    "run_extract",
    "write_emb1",
    "write_jsonl",
]

__version__ = "0.1.0"
