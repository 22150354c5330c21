"""Deterministic synthetic corpora with planted query-specific subspaces.

Each query gets a random subset of dimensions that carry signal for the
query itself and its relevant documents; irrelevant documents carry signal
on a disjoint distractor subset instead, so their centroid contains genuine
off-topic structure.  All randomness comes from counter-based Philox streams
keyed by (seed, stream, query index, doc index), which makes the output a
pure function of the generation parameters, independent of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .store import EmbeddingMatrix
from .trec import Qrels

_STREAM_QUERY = 1
_STREAM_RELEVANT = 2
_STREAM_IRRELEVANT = 3

RELEVANT_GRADE = 2


@dataclass(frozen=True)
class SynthSpec:
    dim: int
    planted_size: int
    queries: int
    relevant_per_query: int
    irrelevant_per_query: int
    noise_sigma: float
    signal_mean: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.planted_size < 1:
            raise ValueError("planted_size must be >= 1")
        if self.planted_size >= self.dim:
            raise ValueError(
                f"planted_size={self.planted_size} must be smaller than dim={self.dim}"
            )
        if min(self.queries, self.relevant_per_query, self.irrelevant_per_query) < 1:
            raise ValueError("queries and per-query doc counts must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class SynthCollection:
    queries: EmbeddingMatrix
    corpus: EmbeddingMatrix
    qrels: Qrels
    planted: dict[str, tuple[int, ...]]


def _rng(seed: int, stream: int, query_index: int, doc_index: int) -> np.random.Generator:
    bit_gen = np.random.Philox(
        counter=[0, 0, query_index, doc_index],
        key=[seed & 0xFFFFFFFFFFFFFFFF, stream],
    )
    return np.random.Generator(bit_gen)


def _signal_vector(rng: np.random.Generator, spec: SynthSpec, on_dims: np.ndarray) -> np.ndarray:
    vec = rng.normal(0.0, spec.noise_sigma, size=spec.dim)
    vec[on_dims] = rng.normal(
        spec.signal_mean, 0.1 * abs(spec.signal_mean), size=on_dims.size
    )
    return vec


def query_id_for(index: int) -> str:
    return f"q{index:04d}"


def generate(spec: SynthSpec) -> SynthCollection:
    """Build queries, corpus, qrels, and the planted dimension sets."""
    query_ids: list[str] = []
    query_rows: list[np.ndarray] = []
    doc_ids: list[str] = []
    doc_rows: list[np.ndarray] = []
    judgments: dict[tuple[str, str], int] = {}
    planted: dict[str, tuple[int, ...]] = {}

    all_dims = np.arange(spec.dim)
    for qi in range(spec.queries):
        qid = query_id_for(qi)
        rng_q = _rng(spec.seed, _STREAM_QUERY, qi, 0)
        on_dims = np.sort(rng_q.choice(spec.dim, size=spec.planted_size, replace=False))
        planted[qid] = tuple(int(i) for i in on_dims)
        query_ids.append(qid)
        query_rows.append(_signal_vector(rng_q, spec, on_dims))

        for dj in range(spec.relevant_per_query):
            rng_d = _rng(spec.seed, _STREAM_RELEVANT, qi, dj)
            did = f"{qid}_rel{dj:04d}"
            doc_ids.append(did)
            doc_rows.append(_signal_vector(rng_d, spec, on_dims))
            judgments[(qid, did)] = RELEVANT_GRADE

        off_dims = np.setdiff1d(all_dims, on_dims, assume_unique=True)
        for dj in range(spec.irrelevant_per_query):
            rng_d = _rng(spec.seed, _STREAM_IRRELEVANT, qi, dj)
            did = f"{qid}_irr{dj:04d}"
            vec = rng_d.normal(0.0, spec.noise_sigma, size=spec.dim)
            distractor = rng_d.choice(off_dims, size=spec.planted_size, replace=False)
            vec[distractor] += rng_d.normal(
                spec.signal_mean, 0.1 * abs(spec.signal_mean), size=spec.planted_size
            )
            doc_ids.append(did)
            doc_rows.append(vec)
            judgments[(qid, did)] = 0

    queries = EmbeddingMatrix(
        ids=tuple(query_ids), data=np.asarray(query_rows, dtype=np.float32)
    )
    corpus = EmbeddingMatrix(ids=tuple(doc_ids), data=np.asarray(doc_rows, dtype=np.float32))
    return SynthCollection(
        queries=queries, corpus=corpus, qrels=Qrels(judgments=judgments), planted=planted
    )
