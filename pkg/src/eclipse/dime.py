"""Dimension-importance estimators and mask selection.

Standard estimators score dimension ``i`` as the product ``q[i] * s[i]`` of
the query with a relevant representative embedding (the sun): either a
centroid of the top pseudo-relevant pool documents or an externally supplied
answer embedding.  The contrastive estimator additionally subtracts a
weighted product with an irrelevant representative embedding (the moon), the
centroid of the bottom pool documents:

    u[i] = alpha * q[i] * s[i] - beta * q[i] * m[i]

which equals the query times the residual vector ``alpha*s - beta*m``.
A mask keeps the highest-scoring fraction of dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor

import numpy as np

from .retrieval import CandidatePool, DimensionMask
from .store import EmbeddingMatrix, as_embedding

VARIANTS = ("prf", "llm")


@dataclass(frozen=True)
class DimeConfig:
    """One estimator configuration point."""

    variant: str
    k_plus: int
    k_minus: int
    alpha: float
    beta: float
    pool_size: int
    retained_fraction: float

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.k_plus < 1 or self.k_minus < 1 or self.pool_size < 1:
            raise ValueError("k_plus, k_minus and pool_size must be positive")
        if self.k_minus >= self.pool_size:
            raise ValueError(
                f"k_minus={self.k_minus} must be smaller than pool_size={self.pool_size}"
            )
        if self.variant == "prf" and self.k_plus >= self.pool_size - self.k_minus:
            raise ValueError(
                f"k_plus={self.k_plus} must be smaller than "
                f"pool_size - k_minus = {self.pool_size - self.k_minus}"
            )
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if not 0 < self.retained_fraction <= 1:
            raise ValueError("retained_fraction must lie in (0, 1]")


def centroid(corpus: EmbeddingMatrix, doc_ids) -> np.ndarray:
    """Coordinate-wise mean of the given documents, as float32."""
    doc_ids = list(doc_ids)
    if not doc_ids:
        raise ValueError("centroid of zero documents is undefined")
    rows = corpus.rows(doc_ids).astype(np.float64)
    return rows.mean(axis=0).astype(np.float32)


def prf_centroid(pool: CandidatePool, corpus: EmbeddingMatrix, k_plus: int) -> np.ndarray:
    """Mean embedding of the top ``k_plus`` pool documents (the sun)."""
    if k_plus < 1:
        raise ValueError("k_plus must be >= 1")
    if len(pool) < k_plus:
        raise ValueError(f"pool has {len(pool)} entries, need at least k_plus={k_plus}")
    return centroid(corpus, pool.doc_ids[:k_plus])


def moon_centroid(pool: CandidatePool, corpus: EmbeddingMatrix, k_minus: int) -> np.ndarray:
    """Mean embedding of the bottom ``k_minus`` pool documents (the moon)."""
    if k_minus < 1:
        raise ValueError("k_minus must be >= 1")
    if len(pool) < k_minus:
        raise ValueError(f"pool has {len(pool)} entries, need at least k_minus={k_minus}")
    return centroid(corpus, pool.doc_ids[-k_minus:])


def dime_score_standard(query, sun) -> np.ndarray:
    """Per-dimension importance ``q[i] * s[i]``, in float64."""
    sun_vec = as_embedding(sun)
    q_vec = as_embedding(query, dim=sun_vec.shape[0])
    return q_vec.astype(np.float64) * sun_vec.astype(np.float64)


def eclipse_score(query, sun, moon, alpha: float, beta: float) -> np.ndarray:
    """Contrastive importance ``alpha*q[i]*s[i] - beta*q[i]*m[i]``, in float64."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    sun_vec = as_embedding(sun)
    moon_vec = as_embedding(moon, dim=sun_vec.shape[0])
    q_vec = as_embedding(query, dim=sun_vec.shape[0]).astype(np.float64)
    return alpha * (q_vec * sun_vec.astype(np.float64)) - beta * (
        q_vec * moon_vec.astype(np.float64)
    )


def retained_count(dim: int, retained_fraction: float) -> int:
    """Number of dimensions kept: round-half-up of fraction*dim, at least 1."""
    if not 0 < retained_fraction <= 1:
        raise ValueError("retained_fraction must lie in (0, 1]")
    return max(1, floor(retained_fraction * dim + 0.5))


def select_dimensions(importance, retained_fraction: float) -> DimensionMask:
    """Mask of the highest-scoring dimensions; ties keep the lower index."""
    scores = np.asarray(importance, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("importance must be a non-empty 1-D vector")
    if not np.all(np.isfinite(scores)):
        raise ValueError("importance scores must be finite")
    count = retained_count(scores.size, retained_fraction)
    order = np.argsort(-scores, kind="stable")
    return DimensionMask(selected=np.sort(order[:count]), dim=scores.size)
