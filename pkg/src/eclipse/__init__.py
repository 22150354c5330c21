"""Query-dependent embedding dimension selection for dense retrieval.

The package estimates how much each embedding dimension contributes to a
query, keeps the highest-scoring fraction, and re-ranks under the masked
similarity.  Importance comes either from a relevant representative alone
(pseudo-relevance centroid or a supplied answer embedding) or contrastively,
by subtracting a centroid of bottom-ranked pseudo-irrelevant documents.
"""

from .config import ConfigError, ExperimentConfig, SamplingConfig
from .dime import (
    DimeConfig,
    dime_score_standard,
    eclipse_score,
    moon_centroid,
    prf_centroid,
    select_dimensions,
)
from .metrics import MetricResult, average_precision, evaluate_run, ndcg_at_k
from .retrieval import CandidatePool, DimensionMask, rerank, score, top_k
from .runner import (
    GridPoint,
    compare_runs,
    load_experiment,
    run_baseline,
    run_dime,
    sample_bottom,
    sweep,
)
from .stats import (
    PairedSample,
    TestOutcome,
    compare_systems,
    holm_bonferroni,
    paired_t_test,
    shapiro_wilk,
    wilcoxon_signed_rank,
)
from .store import EmbeddingMatrix, load_matrix, save_matrix
from .synthgen import SynthSpec, generate
from .trec import Qrels, RunEntry, parse_qrels, parse_run, write_run

__all__ = [
    "CandidatePool",
    "ConfigError",
    "DimeConfig",
    "DimensionMask",
    "EmbeddingMatrix",
    "ExperimentConfig",
    "GridPoint",
    "MetricResult",
    "PairedSample",
    "Qrels",
    "RunEntry",
    "SamplingConfig",
    "SynthSpec",
    "TestOutcome",
    "average_precision",
    "compare_runs",
    "compare_systems",
    "dime_score_standard",
    "eclipse_score",
    "evaluate_run",
    "generate",
    "holm_bonferroni",
    "load_experiment",
    "load_matrix",
    "moon_centroid",
    "ndcg_at_k",
    "paired_t_test",
    "parse_qrels",
    "parse_run",
    "prf_centroid",
    "rerank",
    "run_baseline",
    "run_dime",
    "sample_bottom",
    "save_matrix",
    "score",
    "select_dimensions",
    "shapiro_wilk",
    "sweep",
    "top_k",
    "wilcoxon_signed_rank",
    "write_run",
]

__version__ = "0.1.0"
