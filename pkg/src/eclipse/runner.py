"""Experiment pipelines: baseline retrieval, estimator runs, sweeps,
bottom-window sampling, and cross-system significance tables.

Every pipeline is deterministic given the config and seeds: pools are
retrieved once per (query, pool size), grid points are enumerated in a fixed
order, and all aggregation happens over query-sorted sequences.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .dime import (
    DimeConfig,
    centroid,
    dime_score_standard,
    eclipse_score,
    moon_centroid,
    prf_centroid,
    select_dimensions,
)
from .metrics import MetricResult, evaluate_run
from .retrieval import CandidatePool, rerank, top_k
from .stats import DegenerateSampleError, TestOutcome, compare_systems, holm_bonferroni
from .store import EmbeddingMatrix, load_matrix
from .trec import Qrels, RunEntry, parse_qrels, write_run

VARIANTS = ("prf_dime", "llm_dime", "prf_eclipse", "llm_eclipse")

_SAMPLING_STREAM = 7


@dataclass(frozen=True)
class GridPoint:
    """One hyperparameter point; fields not used by a variant stay None."""

    fraction: float
    pool_size: int
    alpha: float | None = None
    beta: float | None = None
    k_plus: int | None = None
    k_minus: int | None = None

    def slug(self) -> str:
        parts = []
        for key, value in (
            ("a", self.alpha),
            ("b", self.beta),
            ("kp", self.k_plus),
            ("km", self.k_minus),
        ):
            if value is not None:
                parts.append(f"{key}{value:g}")
        parts.append(f"f{self.fraction:g}")
        parts.append(f"p{self.pool_size}")
        return "_".join(parts)

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "k_plus": self.k_plus,
            "k_minus": self.k_minus,
            "fraction": self.fraction,
            "pool_size": self.pool_size,
        }


@dataclass
class ExperimentData:
    queries: EmbeddingMatrix
    corpus: EmbeddingMatrix
    qrels: Qrels
    answers: EmbeddingMatrix | None = None

    def __post_init__(self) -> None:
        if self.queries.dim != self.corpus.dim:
            raise ConfigError(
                f"queries dim {self.queries.dim} != corpus dim {self.corpus.dim}"
            )
        missing = [q for q in self.qrels.query_ids() if q not in self.queries]
        if missing:
            raise ConfigError(f"qrels queries missing from the query matrix: {missing}")
        if self.corpus.n == 0:
            raise ConfigError("corpus is empty")


def load_experiment(cfg: ExperimentConfig) -> ExperimentData:
    cfg.validate()
    cfg.validate_paths()
    fmt = cfg.matrix_format
    answers = None
    if cfg.answers_path is not None:
        answers = load_matrix(cfg.answers_path, fmt)
    return ExperimentData(
        queries=load_matrix(cfg.queries_path, fmt),
        corpus=load_matrix(cfg.corpus_path, fmt),
        qrels=parse_qrels(cfg.qrels_path),
        answers=answers,
    )


class PoolCache:
    """Full-dimensional candidate pools, retrieved once per (query, size)."""

    def __init__(self, data: ExperimentData, similarity: str):
        self._data = data
        self._similarity = similarity
        self._pools: dict[tuple[str, int], CandidatePool] = {}

    def pool(self, query_id: str, pool_size: int) -> CandidatePool:
        key = (query_id, pool_size)
        if key not in self._pools:
            self._pools[key] = top_k(
                self._data.queries.row(query_id),
                self._data.corpus,
                pool_size,
                kind=self._similarity,
                query_id=query_id,
            )
        return self._pools[key]


@dataclass(frozen=True)
class RunResult:
    variant: str
    point: GridPoint | None
    tag: str
    run_path: str
    ap: MetricResult
    ndcg: MetricResult
    skipped: tuple[str, ...] = ()


def _evaluated(cfg: ExperimentConfig, data: ExperimentData, entries: list[RunEntry]):
    return evaluate_run(
        entries, data.qrels, k=cfg.ndcg_k, binary_threshold=cfg.binary_threshold
    )


def _ranking_entries(pool: CandidatePool, tag: str) -> list[RunEntry]:
    return [
        RunEntry(query_id=pool.query_id, doc_id=doc_id, rank=rank, score=score, tag=tag)
        for rank, (doc_id, score) in enumerate(pool.entries, start=1)
    ]


def run_baseline(
    cfg: ExperimentConfig,
    data: ExperimentData,
    tag: str = "baseline",
    run_name: str = "baseline.run",
) -> RunResult:
    """Full-dimensional retrieval for every judged query."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries: list[RunEntry] = []
    for qid in data.qrels.query_ids():
        ranking = top_k(
            data.queries.row(qid),
            data.corpus,
            cfg.rerank_depth,
            kind=cfg.similarity,
            query_id=qid,
        )
        entries.extend(_ranking_entries(ranking, tag))
    run_path = out_dir / run_name
    write_run(entries, run_path)
    ap, ndcg = _evaluated(cfg, data, entries)
    return RunResult(
        variant="baseline", point=None, tag=tag, run_path=str(run_path), ap=ap, ndcg=ndcg
    )


def _validate_point(cfg: ExperimentConfig, variant: str, point: GridPoint) -> GridPoint:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if variant == "prf_dime" and point.k_plus is None:
        point = replace(point, k_plus=1)
    if variant.endswith("eclipse"):
        if point.alpha is None or point.beta is None or point.k_minus is None:
            raise ConfigError(f"{variant} needs alpha, beta and k_minus")
        if variant == "prf_eclipse" and point.k_plus is None:
            raise ConfigError("prf_eclipse needs k_plus")
        # DimeConfig enforces the k/pool-size relations
        DimeConfig(
            variant="prf" if variant.startswith("prf") else "llm",
            k_plus=point.k_plus if point.k_plus is not None else 1,
            k_minus=point.k_minus,
            alpha=point.alpha,
            beta=point.beta,
            pool_size=point.pool_size,
            retained_fraction=point.fraction,
        )
    else:
        if not 0 < point.fraction <= 1:
            raise ConfigError("retained fraction must lie in (0, 1]")
        if point.k_plus is not None and point.k_plus > point.pool_size:
            raise ConfigError("k_plus cannot exceed the pool size")
    if variant.startswith("llm") and cfg.answers_path is None:
        raise ConfigError(f"{variant} requires answers_path in the config")
    return point


def run_dime(
    cfg: ExperimentConfig,
    data: ExperimentData,
    variant: str,
    point: GridPoint,
    tag: str | None = None,
    pool_cache: PoolCache | None = None,
    run_path: str | Path | None = None,
    moon_override=None,
) -> RunResult:
    """One estimator pass at one grid point: pool, sun/moon, mask, rerank.

    ``moon_override`` maps query_id to a replacement moon embedding and is
    used by the bottom-window sampling study.
    """
    point = _validate_point(cfg, variant, point)
    tag = tag or variant
    cache = pool_cache or PoolCache(data, cfg.similarity)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if run_path is None:
        run_path = out_dir / f"{variant}_{point.slug()}.run"

    entries: list[RunEntry] = []
    skipped: list[str] = []
    for qid in data.qrels.query_ids():
        query_vec = data.queries.row(qid)
        pool = cache.pool(qid, point.pool_size)
        if variant.startswith("prf"):
            sun = prf_centroid(pool, data.corpus, point.k_plus or 1)
        else:
            if data.answers is None or qid not in data.answers:
                skipped.append(qid)
                continue
            sun = data.answers.row(qid)
        if variant.endswith("eclipse"):
            if moon_override is not None:
                moon = moon_override(qid, pool)
            else:
                moon = moon_centroid(pool, data.corpus, point.k_minus)
            importance = eclipse_score(query_vec, sun, moon, point.alpha, point.beta)
        else:
            importance = dime_score_standard(query_vec, sun)
        mask = select_dimensions(importance, point.fraction)
        ranking = rerank(
            query_vec,
            data.corpus,
            mask,
            kind=cfg.similarity,
            depth=cfg.rerank_depth,
            pool=pool if cfg.rerank_scope == "pool" else None,
            query_id=qid,
        )
        entries.extend(_ranking_entries(ranking, tag))

    if not entries:
        raise ConfigError(f"{variant}: every query was skipped, nothing to evaluate")
    write_run(entries, run_path)
    ap, ndcg = _evaluated(cfg, data, entries)
    return RunResult(
        variant=variant,
        point=point,
        tag=tag,
        run_path=str(run_path),
        ap=ap,
        ndcg=ndcg,
        skipped=tuple(skipped),
    )


def grid_points(cfg: ExperimentConfig, variant: str) -> list[GridPoint]:
    """Deterministic enumeration of the grid for one variant."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    cfg.validate()  # dedupes grids, so every point appears exactly once
    points: list[GridPoint] = []
    if variant in ("prf_dime", "llm_dime"):
        fixed_k_plus = 1 if variant == "prf_dime" else None
        for fraction, pool_size in product(cfg.fraction_grid, cfg.pool_size_grid):
            points.append(
                GridPoint(fraction=fraction, pool_size=pool_size, k_plus=fixed_k_plus)
            )
    else:
        k_plus_axis = cfg.k_plus_grid if variant == "prf_eclipse" else [None]
        for alpha, beta, k_plus, k_minus, fraction, pool_size in product(
            cfg.alpha_grid,
            cfg.beta_grid,
            k_plus_axis,
            cfg.k_minus_grid,
            cfg.fraction_grid,
            cfg.pool_size_grid,
        ):
            points.append(
                GridPoint(
                    fraction=fraction,
                    pool_size=pool_size,
                    alpha=alpha,
                    beta=beta,
                    k_plus=k_plus,
                    k_minus=k_minus,
                )
            )
    for point in points:
        _validate_point(cfg, variant, point)
    return points


@dataclass(frozen=True)
class SweepRow:
    point: GridPoint
    run_path: str
    per_query_path: str
    mean_ap: float
    mean_ndcg: float
    skipped: tuple[str, ...]


@dataclass
class SweepReport:
    variant: str
    rows: list[SweepRow]
    best_by_ap: SweepRow
    best_by_ndcg: SweepRow
    csv_path: str
    summary_path: str
    curve_paths: list[str]


_CSV_COLUMNS = (
    "alpha", "beta", "k_plus", "k_minus", "fraction", "pool_size",
    "mean_ap", "mean_ndcg", "run_file", "per_query_file", "skipped",
)


def _write_per_query(path: Path, ap: MetricResult, ndcg: MetricResult) -> None:
    payload = {
        qid: {"ap": ap.per_query[qid], "ndcg": ndcg.per_query[qid]}
        for qid in sorted(ap.per_query)
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def sweep(cfg: ExperimentConfig, data: ExperimentData, variant: str) -> SweepReport:
    """Evaluate every grid point and emit per-point, best-point, and curve files."""
    points = grid_points(cfg, variant)
    out_dir = Path(cfg.output_dir)
    runs_dir = out_dir / "runs" / variant
    per_query_dir = out_dir / "perquery" / variant
    runs_dir.mkdir(parents=True, exist_ok=True)
    per_query_dir.mkdir(parents=True, exist_ok=True)

    cache = PoolCache(data, cfg.similarity)
    rows: list[SweepRow] = []
    for point in points:
        run_path = runs_dir / f"{point.slug()}.run"
        result = run_dime(cfg, data, variant, point, pool_cache=cache, run_path=run_path)
        per_query_path = per_query_dir / f"{point.slug()}.json"
        _write_per_query(per_query_path, result.ap, result.ndcg)
        rows.append(
            SweepRow(
                point=point,
                run_path=str(run_path),
                per_query_path=str(per_query_path),
                mean_ap=result.ap.mean,
                mean_ndcg=result.ndcg.mean,
                skipped=result.skipped,
            )
        )

    csv_path = out_dir / f"sweep_{variant}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_COLUMNS)
        for row in rows:
            d = row.point.as_dict()
            writer.writerow(
                [
                    d["alpha"], d["beta"], d["k_plus"], d["k_minus"],
                    d["fraction"], d["pool_size"],
                    f"{row.mean_ap:.6f}", f"{row.mean_ndcg:.6f}",
                    row.run_path, row.per_query_path, ";".join(row.skipped),
                ]
            )

    best_by_ap = max(rows, key=lambda r: r.mean_ap)
    best_by_ndcg = max(rows, key=lambda r: r.mean_ndcg)

    curve_paths: list[str] = []
    for pool_size in cfg.pool_size_grid:
        curve_path = out_dir / f"curve_{variant}_pool{pool_size:08d}.csv"
        with open(curve_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["fraction", "best_mean_ap", "best_mean_ndcg"])
            for fraction in cfg.fraction_grid:
                slice_rows = [
                    r
                    for r in rows
                    if r.point.pool_size == pool_size and r.point.fraction == fraction
                ]
                writer.writerow(
                    [
                        fraction,
                        f"{max(r.mean_ap for r in slice_rows):.6f}",
                        f"{max(r.mean_ndcg for r in slice_rows):.6f}",
                    ]
                )
        curve_paths.append(str(curve_path))

    summary_path = out_dir / f"summary_{variant}.json"
    summary = {
        "variant": variant,
        "n_points": len(rows),
        "best_by_ap": {**best_by_ap.point.as_dict(), "mean_ap": best_by_ap.mean_ap,
                       "run_file": best_by_ap.run_path},
        "best_by_ndcg": {**best_by_ndcg.point.as_dict(), "mean_ndcg": best_by_ndcg.mean_ndcg,
                         "run_file": best_by_ndcg.run_path},
        "skipped_queries": sorted({q for r in rows for q in r.skipped}),
    }
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")

    return SweepReport(
        variant=variant,
        rows=rows,
        best_by_ap=best_by_ap,
        best_by_ndcg=best_by_ndcg,
        csv_path=str(csv_path),
        summary_path=str(summary_path),
        curve_paths=curve_paths,
    )


@dataclass(frozen=True)
class SampleBottomReport:
    variant: str
    point: GridPoint
    window: int
    trials: int
    seed: int
    trial_mean_ap: tuple[float, ...]
    trial_mean_ndcg: tuple[float, ...]
    mean_ap: float
    std_ap: float
    mean_ndcg: float
    std_ndcg: float
    exact_mean_ap: float
    exact_mean_ndcg: float

    def render_text(self) -> str:
        lines = [
            f"variant={self.variant} point={self.point.slug()} "
            f"window={self.window} trials={self.trials} seed={self.seed}",
            f"{'row':<16} {'mAP':>18} {'nDCG@10':>18}",
            f"{'sampled@' + str(self.window):<16} "
            f"{self.mean_ap:.4f} +/- {self.std_ap:.4f} "
            f"{self.mean_ndcg:.4f} +/- {self.std_ndcg:.4f}",
            f"{'bottom-k_minus':<16} {self.exact_mean_ap:>11.4f}        "
            f"{self.exact_mean_ndcg:>11.4f}",
        ]
        return "\n".join(lines)


def sample_bottom(
    cfg: ExperimentConfig,
    data: ExperimentData,
    point: GridPoint,
    variant: str = "prf_eclipse",
) -> SampleBottomReport:
    """Moon built from random bottom-window documents instead of the exact bottom.

    Each trial samples k_minus documents uniformly without replacement from
    the last ``window`` pool positions, per query, using counter-based
    streams keyed by (seed, trial, query index).  Reports the mean and
    sample standard deviation across trials next to the exact-bottom row.
    """
    cfg.validate()
    if cfg.sampling is None:
        raise ConfigError("sample_bottom requires a sampling config")
    cfg.sampling.validate()
    window, trials, seed = cfg.sampling.window, cfg.sampling.trials, cfg.sampling.seed
    point = _validate_point(cfg, variant, point)
    if not variant.endswith("eclipse"):
        raise ConfigError("bottom-window sampling applies to eclipse variants only")
    if window > point.pool_size:
        raise ConfigError(f"window {window} exceeds pool_size {point.pool_size}")
    if window < point.k_minus:
        raise ConfigError(f"window {window} is smaller than k_minus {point.k_minus}")

    cache = PoolCache(data, cfg.similarity)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    exact = run_dime(
        cfg, data, variant, point, pool_cache=cache,
        run_path=out_dir / f"sample_bottom_{variant}_exact.run",
    )

    query_index = {qid: i for i, qid in enumerate(data.qrels.query_ids())}

    trial_ap: list[float] = []
    trial_ndcg: list[float] = []
    for trial in range(trials):
        def sampled_moon(qid: str, pool: CandidatePool, _trial=trial):
            bottom_ids = pool.doc_ids[-window:]
            rng = np.random.Generator(
                np.random.Philox(
                    counter=[0, 0, _trial, query_index[qid]],
                    key=[seed & 0xFFFFFFFFFFFFFFFF, _SAMPLING_STREAM],
                )
            )
            chosen = rng.choice(len(bottom_ids), size=point.k_minus, replace=False)
            return centroid(data.corpus, [bottom_ids[i] for i in sorted(chosen)])

        result = run_dime(
            cfg, data, variant, point, pool_cache=cache,
            run_path=out_dir / f"sample_bottom_{variant}_trial{trial:03d}.run",
            moon_override=sampled_moon,
        )
        trial_ap.append(result.ap.mean)
        trial_ndcg.append(result.ndcg.mean)

    ap_arr = np.asarray(trial_ap)
    ndcg_arr = np.asarray(trial_ndcg)
    report = SampleBottomReport(
        variant=variant,
        point=point,
        window=window,
        trials=trials,
        seed=seed,
        trial_mean_ap=tuple(trial_ap),
        trial_mean_ndcg=tuple(trial_ndcg),
        mean_ap=float(ap_arr.mean()),
        std_ap=float(ap_arr.std(ddof=1)),
        mean_ndcg=float(ndcg_arr.mean()),
        std_ndcg=float(ndcg_arr.std(ddof=1)),
        exact_mean_ap=exact.ap.mean,
        exact_mean_ndcg=exact.ndcg.mean,
    )
    report_path = out_dir / f"sample_bottom_{variant}.json"
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(
            {
                "variant": variant,
                "point": point.as_dict(),
                "window": window,
                "trials": trials,
                "seed": seed,
                "trial_mean_ap": trial_ap,
                "trial_mean_ndcg": trial_ndcg,
                "mean_ap": report.mean_ap,
                "std_ap": report.std_ap,
                "mean_ndcg": report.mean_ndcg,
                "std_ndcg": report.std_ndcg,
                "exact_mean_ap": report.exact_mean_ap,
                "exact_mean_ndcg": report.exact_mean_ndcg,
            },
            f,
            indent=2,
        )
        f.write("\n")
    return report


@dataclass(frozen=True)
class ComparisonCell:
    treatment: str
    baseline: str
    metric: str
    outcome: TestOutcome | None
    corrected_significant: bool | None

    @property
    def degenerate(self) -> bool:
        return self.outcome is None


@dataclass
class ComparisonTable:
    """Pairwise treatment-vs-baseline tests with family-wise correction.

    The Holm-Bonferroni family is the set of non-degenerate comparisons for
    one metric within one invocation.
    """

    names: list[str]
    baselines: list[str]
    ap: dict[str, MetricResult]
    ndcg: dict[str, MetricResult]
    cells: list[ComparisonCell]
    alpha: float

    def baseline_label(self, name: str) -> str:
        return chr(ord("a") + self.baselines.index(name))

    def annotations(self, treatment: str, metric: str) -> str:
        letters = [
            self.baseline_label(c.baseline)
            for c in self.cells
            if c.treatment == treatment and c.metric == metric and c.corrected_significant
        ]
        return "".join(sorted(letters))

    def notes(self, treatment: str) -> str:
        degenerate = sorted(
            {self.baseline_label(c.baseline) for c in self.cells
             if c.treatment == treatment and c.degenerate}
        )
        return f"n/a vs {','.join(degenerate)}" if degenerate else ""

    def render_text(self) -> str:
        width = max(len(n) for n in self.names) + 2
        lines = [
            f"{'system':<{width}} {'label':<6} {'mAP':<12} {'nDCG@10':<12} notes",
        ]
        for name in self.names:
            label = f"({self.baseline_label(name)})" if name in self.baselines else ""
            ap_text = f"{self.ap[name].mean:.4f}"
            ndcg_text = f"{self.ndcg[name].mean:.4f}"
            if name not in self.baselines:
                ap_text += self.annotations(name, "ap")
                ndcg_text += self.annotations(name, "ndcg")
            lines.append(
                f"{name:<{width}} {label:<6} {ap_text:<12} {ndcg_text:<12} "
                f"{self.notes(name) if name not in self.baselines else ''}".rstrip()
            )
        lines.append(
            f"suffix letters: significantly better than that baseline "
            f"(Holm-Bonferroni, alpha={self.alpha:g})"
        )
        return "\n".join(lines)


def compare_runs(
    ap: dict[str, MetricResult],
    ndcg: dict[str, MetricResult],
    baselines: list[str],
    treatments: list[str],
    alpha: float = 0.05,
) -> ComparisonTable:
    """Compare each treatment against each baseline on both metrics."""
    for name in baselines + treatments:
        if name not in ap or name not in ndcg:
            raise ConfigError(f"no metric results for system {name!r}")
    cells: list[ComparisonCell] = []
    for metric, results in (("ap", ap), ("ndcg", ndcg)):
        raw: list[tuple[str, str, TestOutcome | None]] = []
        for treatment in treatments:
            for baseline in baselines:
                try:
                    outcome = compare_systems(results[baseline], results[treatment], alpha)
                except DegenerateSampleError:
                    outcome = None
                raw.append((treatment, baseline, outcome))
        testable = [(i, o) for i, (_, _, o) in enumerate(raw) if o is not None]
        decisions = holm_bonferroni([o.p_value for _, o in testable], alpha) if testable else []
        corrected = {i: d for (i, _), d in zip(testable, decisions)}
        for i, (treatment, baseline, outcome) in enumerate(raw):
            cells.append(
                ComparisonCell(
                    treatment=treatment,
                    baseline=baseline,
                    metric=metric,
                    outcome=outcome,
                    corrected_significant=corrected.get(i),
                )
            )
    names = baselines + [t for t in treatments if t not in baselines]
    return ComparisonTable(
        names=names, baselines=baselines, ap=ap, ndcg=ndcg, cells=cells, alpha=alpha
    )
