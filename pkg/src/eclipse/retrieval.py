"""Exact similarity scoring and top-k ranking, with optional dimension masks.

All scores are accumulated in float64 over the float32 inputs, and every
scoring path (single pair, top-k, rerank) flows through one elementwise
multiply-and-sum kernel so that identical inputs produce bit-identical
scores regardless of batch size.  Masking zeroes the inactive coordinates
of the query, which leaves the summation tree unchanged: a masked inner
product is bit-equal to the inner product of explicitly zeroed vectors.

Ties are broken by ascending document id, so rankings are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .store import EmbeddingMatrix, as_embedding

Similarity = Literal["inner_product", "cosine"]

SIMILARITIES = ("inner_product", "cosine")


def _check_similarity(kind: str) -> None:
    if kind not in SIMILARITIES:
        raise ValueError(f"unknown similarity {kind!r}, expected one of {SIMILARITIES}")


@dataclass(frozen=True)
class DimensionMask:
    """A non-empty set of active dimension indices within a d-dimensional space."""

    selected: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        sel = np.asarray(self.selected, dtype=np.int64)
        if sel.ndim != 1 or sel.size == 0:
            raise ValueError("mask must select at least one dimension")
        if self.dim < 1:
            raise ValueError("mask dim must be >= 1")
        sel = np.unique(sel)
        if sel[0] < 0 or sel[-1] >= self.dim:
            raise ValueError(f"mask indices must lie in [0, {self.dim})")
        sel.setflags(write=False)
        object.__setattr__(self, "selected", sel)

    @classmethod
    def full(cls, dim: int) -> "DimensionMask":
        return cls(selected=np.arange(dim), dim=dim)

    @property
    def size(self) -> int:
        return int(self.selected.size)

    def is_full(self) -> bool:
        return self.size == self.dim

    def indicator(self) -> np.ndarray:
        """0/1 float64 vector with ones on the selected dimensions."""
        ind = np.zeros(self.dim)
        ind[self.selected] = 1.0
        return ind


@dataclass(frozen=True)
class CandidatePool:
    """Ranked (doc_id, score) entries for one query, best first."""

    query_id: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        entries = tuple((str(d), float(s)) for d, s in self.entries)
        seen: set[str] = set()
        prev = None
        for doc_id, score in entries:
            if doc_id in seen:
                raise ValueError(f"duplicate doc id {doc_id!r} in pool")
            seen.add(doc_id)
            if not np.isfinite(score):
                raise ValueError(f"non-finite score for {doc_id!r}")
            if prev is not None and score > prev:
                raise ValueError("pool scores must be non-increasing")
            prev = score
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d for d, _ in self.entries)

    @property
    def scores(self) -> tuple[float, ...]:
        return tuple(s for _, s in self.entries)


def _masked_query(query: np.ndarray, mask: DimensionMask | None, dim: int) -> np.ndarray:
    q = as_embedding(query, dim=dim).astype(np.float64)
    if mask is None:
        return q
    if mask.dim != dim:
        raise ValueError(f"mask dim {mask.dim} != embedding dim {dim}")
    out = np.zeros(dim)
    out[mask.selected] = q[mask.selected]
    return out


def _inner_products(rows64: np.ndarray, masked_q: np.ndarray) -> np.ndarray:
    # the single scoring kernel: elementwise product + pairwise row sum
    return (rows64 * masked_q).sum(axis=1)


def _batch_scores(
    rows64: np.ndarray, query: np.ndarray, kind: str, mask: DimensionMask | None
) -> np.ndarray:
    dim = rows64.shape[1]
    masked_q = _masked_query(query, mask, dim)
    num = _inner_products(rows64, masked_q)
    if kind == "inner_product":
        return num
    q_sq = float((masked_q * masked_q).sum())
    if q_sq == 0.0:
        raise ValueError("cosine is undefined: query has zero norm on active dimensions")
    if mask is None or mask.is_full():
        masked_rows = rows64
    else:
        masked_rows = rows64 * mask.indicator()
    rows_sq = (masked_rows * masked_rows).sum(axis=1)
    if np.any(rows_sq == 0.0):
        raise ValueError("cosine is undefined: a document has zero norm on active dimensions")
    return num / np.sqrt(q_sq * rows_sq)


def score(
    query,
    doc,
    kind: Similarity = "inner_product",
    mask: DimensionMask | None = None,
) -> float:
    """Similarity of one query-document pair over the active dimensions."""
    _check_similarity(kind)
    doc_vec = as_embedding(doc)
    q_vec = as_embedding(query, dim=doc_vec.shape[0])
    rows64 = doc_vec.astype(np.float64)[None, :]
    return float(_batch_scores(rows64, q_vec, kind, mask)[0])


def _ranked_order(scores: np.ndarray, ids_array: np.ndarray) -> np.ndarray:
    # primary key: descending score, secondary: ascending doc id
    return np.lexsort((ids_array, -scores))


def top_k(
    query,
    corpus: EmbeddingMatrix,
    k: int,
    kind: Similarity = "inner_product",
    mask: DimensionMask | None = None,
    query_id: str = "",
) -> CandidatePool:
    """The k highest-scoring corpus documents, fewer if the corpus is smaller."""
    _check_similarity(kind)
    if k < 1:
        raise ValueError("k must be >= 1")
    if corpus.n == 0:
        raise ValueError("cannot retrieve from an empty corpus")
    scores = _batch_scores(corpus.data64, query, kind, mask)
    order = _ranked_order(scores, corpus.ids_array)[: min(k, corpus.n)]
    entries = tuple((corpus.ids[i], float(scores[i])) for i in order)
    return CandidatePool(query_id=query_id, entries=entries)


def rerank(
    query,
    corpus: EmbeddingMatrix,
    mask: DimensionMask,
    kind: Similarity = "inner_product",
    depth: int = 1000,
    pool: CandidatePool | None = None,
    query_id: str = "",
) -> CandidatePool:
    """Rank documents under the masked similarity.

    With ``pool=None`` every corpus document is re-scored; otherwise only the
    pool members are.  ``depth`` truncates the returned ranking.
    """
    _check_similarity(kind)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if pool is None:
        return top_k(query, corpus, depth, kind=kind, mask=mask, query_id=query_id)
    if len(pool) == 0:
        raise ValueError("cannot rerank an empty pool")
    idx = np.asarray([corpus.row_index(d) for d in pool.doc_ids])
    rows64 = corpus.data64[idx]
    scores = _batch_scores(rows64, query, kind, mask)
    ids_array = np.asarray(pool.doc_ids, dtype=object)
    order = _ranked_order(scores, ids_array)[: min(depth, len(pool))]
    entries = tuple((str(ids_array[i]), float(scores[i])) for i in order)
    return CandidatePool(query_id=query_id or pool.query_id, entries=entries)
