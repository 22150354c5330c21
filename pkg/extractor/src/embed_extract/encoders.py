"""Text encoders: pre-trained bi-encoder checkpoints and an offline fallback.

The registry lists public retrieval checkpoints with the pooling and
normalization conventions documented on their model cards; what was actually
used is recorded in the manifest written next to every output file.  Model
ids of the form ``hash:<dim>`` select a deterministic feature-hashing
encoder that needs no downloads, for tests and air-gapped runs.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np


@dataclass(frozen=True)
class ModelSpec:
    hf_id: str
    dim: int
    pooling: str  # "cls" or "mean", per the model card
    normalize: bool


# documented embedding widths and pooling conventions of the supported
# public checkpoints
REGISTRY: dict[str, ModelSpec] = {
    "ance": ModelSpec(
        hf_id="sentence-transformers/msmarco-roberta-base-ance-firstp",
        dim=768, pooling="cls", normalize=False,
    ),
    "contriever": ModelSpec(
        hf_id="facebook/contriever",
        dim=768, pooling="mean", normalize=False,
    ),
    "tas-b": ModelSpec(
        hf_id="sentence-transformers/msmarco-distilbert-base-tas-b",
        dim=768, pooling="cls", normalize=False,
    ),
}

_TOKEN_RE = re.compile(r"[a-z0-9']+")
_HASH_PREFIX = "hash:"


class Encoder(Protocol):
    dim: int
    pooling: str
    model_id: str

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


class HashingEncoder:
    """Deterministic bag-of-tokens encoder.

    Each token maps to a fixed pseudo-random Gaussian direction derived from
    its SHA-256 digest; a text is the L2-normalized sum of its token
    directions.  Identical texts give bit-identical rows on any platform.
    """

    pooling = "token-hash-sum"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.model_id = f"{_HASH_PREFIX}{dim}"

    def _token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        key = np.frombuffer(digest[:16], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        return rng.standard_normal(self.dim)

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        rows = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            for token in _TOKEN_RE.findall(text.lower()):
                rows[i] += self._token_vector(token)
            norm = float(np.linalg.norm(rows[i]))
            if norm > 0:
                rows[i] /= norm
        return rows.astype(np.float32)


class HuggingFaceEncoder:
    """Transformer checkpoint encoder with cls or attention-masked mean pooling."""

    def __init__(self, spec: ModelSpec, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise RuntimeError(
                "transformers and torch are required for checkpoint encoders; "
                "install the 'hf' extra"
            ) from exc
        self._torch = torch
        self.model_id = spec.hf_id
        self.dim = spec.dim
        self.pooling = spec.pooling
        self.normalize = spec.normalize
        self.device = device
        self.tokenizer = AutoTokenizer.from_pretrained(spec.hf_id)
        self.model = AutoModel.from_pretrained(spec.hf_id).to(device).eval()

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        torch = self._torch
        batch = self.tokenizer(
            list(texts), padding=True, truncation=True, max_length=512,
            return_tensors="pt",
        ).to(self.device)
        with torch.no_grad():
            output = self.model(**batch).last_hidden_state
        if self.pooling == "cls":
            pooled = output[:, 0]
        else:
            attention = batch["attention_mask"].unsqueeze(-1).float()
            pooled = (output * attention).sum(dim=1) / attention.sum(dim=1).clamp(min=1)
        if self.normalize:
            pooled = torch.nn.functional.normalize(pooled, dim=-1)
        return pooled.cpu().numpy().astype(np.float32)


def documented_width(model_id: str) -> int:
    """Embedding width the output header must carry for this model id."""
    if model_id.startswith(_HASH_PREFIX):
        return int(model_id[len(_HASH_PREFIX):])
    if model_id in REGISTRY:
        return REGISTRY[model_id].dim
    raise KeyError(f"unknown model id {model_id!r}")


def build_encoder(model_id: str, device: str = "cpu"):
    if model_id.startswith(_HASH_PREFIX):
        return HashingEncoder(int(model_id[len(_HASH_PREFIX):]))
    if model_id in REGISTRY:
        return HuggingFaceEncoder(REGISTRY[model_id], device=device)
    raise KeyError(
        f"unknown model id {model_id!r}; known: {sorted(REGISTRY)} or hash:<dim>"
    )
