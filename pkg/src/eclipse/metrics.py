"""Rank-based effectiveness metrics: average precision and nDCG@k.

Average precision binarizes graded judgments at a configurable threshold
(grade >= threshold counts as relevant) and divides by the total number of
judged-relevant documents, retrieved or not.  nDCG uses exponential gain
(2^grade - 1) with a log2(rank + 1) discount, normalized by the ideal
ordering over all judged documents.  Both lie in [0, 1].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .retrieval import CandidatePool
from .trec import Qrels, RunEntry


class NoRelevantDocumentsWarning(UserWarning):
    """A query has no judged-relevant document at the chosen threshold."""


class ZeroIdealGainWarning(UserWarning):
    """A query has no positive judged grade, so the ideal DCG is zero."""


class DisjointQueriesError(ValueError):
    """The run and the qrels share no query id."""


@dataclass(frozen=True)
class MetricResult:
    """Per-query metric values and their arithmetic mean."""

    per_query: dict[str, float]
    mean: float

    @classmethod
    def from_per_query(cls, per_query: dict[str, float]) -> "MetricResult":
        if not per_query:
            raise ValueError("cannot aggregate an empty per-query map")
        for qid, value in per_query.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"metric for {qid} must lie in [0, 1], got {value}")
        # summation in sorted query order keeps the mean order-independent
        ordered = [per_query[qid] for qid in sorted(per_query)]
        return cls(per_query=dict(per_query), mean=sum(ordered) / len(ordered))

    def query_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.per_query))


def average_precision(ranking: CandidatePool, qrels: Qrels, binary_threshold: int = 2) -> float:
    """AP of one ranking; unjudged documents count as non-relevant."""
    total_relevant = qrels.relevant_count(ranking.query_id, binary_threshold)
    if total_relevant == 0:
        warnings.warn(
            f"query {ranking.query_id!r}: no relevant document at threshold "
            f"{binary_threshold}, AP defined as 0.0",
            NoRelevantDocumentsWarning,
            stacklevel=2,
        )
        return 0.0
    hits = 0
    precision_sum = 0.0
    for rank, doc_id in enumerate(ranking.doc_ids, start=1):
        if qrels.grade(ranking.query_id, doc_id) >= binary_threshold:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / total_relevant


def _gain(grade: int) -> float:
    return float(2**grade - 1)


def ndcg_at_k(ranking: CandidatePool, qrels: Qrels, k: int = 10) -> float:
    """nDCG@k of one ranking against graded judgments."""
    if k < 1:
        raise ValueError("k must be >= 1")
    judged = qrels.judged(ranking.query_id)
    ideal_gains = sorted((_gain(g) for g in judged.values()), reverse=True)[:k]
    ideal = sum(g / math.log2(r + 1) for r, g in enumerate(ideal_gains, start=1))
    if ideal == 0.0:
        warnings.warn(
            f"query {ranking.query_id!r}: no positive grade, nDCG defined as 0.0",
            ZeroIdealGainWarning,
            stacklevel=2,
        )
        return 0.0
    dcg = 0.0
    for rank, doc_id in enumerate(ranking.doc_ids[:k], start=1):
        dcg += _gain(qrels.grade(ranking.query_id, doc_id)) / math.log2(rank + 1)
    return dcg / ideal


def pools_from_run(entries: list[RunEntry]) -> dict[str, CandidatePool]:
    """Group run entries into per-query pools, preserving rank order."""
    grouped: dict[str, list[tuple[str, float]]] = {}
    for entry in entries:
        grouped.setdefault(entry.query_id, []).append((entry.doc_id, entry.score))
    return {
        qid: CandidatePool(query_id=qid, entries=tuple(items))
        for qid, items in grouped.items()
    }


def evaluate_run(
    entries: list[RunEntry],
    qrels: Qrels,
    k: int = 10,
    binary_threshold: int = 2,
) -> tuple[MetricResult, MetricResult]:
    """Mean AP and mean nDCG@k over the qrels queries.

    Queries judged in the qrels but missing from the run score 0 on both
    metrics; run queries without judgments are ignored.
    """
    pools = pools_from_run(entries)
    qrels_queries = qrels.query_ids()
    if not set(pools) & set(qrels_queries):
        raise DisjointQueriesError("run and qrels have no query in common")
    ap: dict[str, float] = {}
    ndcg: dict[str, float] = {}
    for qid in qrels_queries:
        pool = pools.get(qid)
        if pool is None:
            ap[qid] = 0.0
            ndcg[qid] = 0.0
            continue
        ap[qid] = average_precision(pool, qrels, binary_threshold=binary_threshold)
        ndcg[qid] = ndcg_at_k(pool, qrels, k=k)
    return MetricResult.from_per_query(ap), MetricResult.from_per_query(ndcg)
