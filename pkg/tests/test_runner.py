import json

import numpy as np
import pytest

from eclipse.cli import main as cli_main
from eclipse.config import ConfigError, ExperimentConfig, SamplingConfig
from eclipse.metrics import MetricResult, evaluate_run
from eclipse.runner import (
    GridPoint,
    compare_runs,
    grid_points,
    load_experiment,
    run_baseline,
    run_dime,
    sample_bottom,
    sweep,
)
from eclipse.store import EmbeddingMatrix, save_matrix
from eclipse.synthgen import SynthSpec, generate
from eclipse.trec import parse_run, save_qrels


SPEC = SynthSpec(
    dim=16,
    planted_size=4,
    queries=4,
    relevant_per_query=3,
    irrelevant_per_query=17,
    noise_sigma=0.0,
    seed=23,
)


@pytest.fixture(scope="module")
def collection():
    return generate(SPEC)


@pytest.fixture()
def workspace(tmp_path, collection):
    save_matrix(collection.queries, tmp_path / "queries.emb1")
    save_matrix(collection.corpus, tmp_path / "corpus.emb1")
    save_qrels(collection.qrels, tmp_path / "qrels.txt")
    cfg = ExperimentConfig(
        queries_path=str(tmp_path / "queries.emb1"),
        corpus_path=str(tmp_path / "corpus.emb1"),
        qrels_path=str(tmp_path / "qrels.txt"),
        output_dir=str(tmp_path / "out"),
        alpha_grid=[1.0],
        beta_grid=[1.0],
        k_plus_grid=[1],
        k_minus_grid=[3],
        fraction_grid=[0.25, 1.0],
        pool_size_grid=[20],
        rerank_depth=20,
    )
    return cfg


def test_baseline_on_noiseless_corpus_is_perfect(workspace):
    data = load_experiment(workspace)
    result = run_baseline(workspace, data)
    assert result.ap.mean == 1.0
    assert result.ndcg.mean == 1.0


def test_full_fraction_contrastive_run_equals_baseline_bytes(workspace, tmp_path):
    data = load_experiment(workspace)
    baseline = run_baseline(workspace, data, tag="std")
    point = GridPoint(fraction=1.0, pool_size=20, alpha=1.0, beta=1.0, k_plus=1, k_minus=3)
    treated = run_dime(workspace, data, "prf_eclipse", point, tag="std")
    with open(baseline.run_path, "rb") as f:
        base_bytes = f.read()
    with open(treated.run_path, "rb") as f:
        run_bytes = f.read()
    assert base_bytes == run_bytes


def test_beta_zero_contrastive_equals_standard_run(workspace):
    data = load_experiment(workspace)
    point = GridPoint(fraction=0.25, pool_size=20, alpha=1.0, beta=0.0, k_plus=1, k_minus=3)
    contrastive = run_dime(workspace, data, "prf_eclipse", point, tag="same")
    standard = run_dime(
        workspace, data, "prf_dime",
        GridPoint(fraction=0.25, pool_size=20, k_plus=1), tag="same",
    )
    with open(contrastive.run_path, "rb") as f:
        a = f.read()
    with open(standard.run_path, "rb") as f:
        b = f.read()
    assert a == b


def test_run_files_reevaluate_to_reported_metrics(workspace):
    data = load_experiment(workspace)
    point = GridPoint(fraction=0.25, pool_size=20, alpha=1.0, beta=1.0, k_plus=1, k_minus=3)
    result = run_dime(workspace, data, "prf_eclipse", point)
    entries = parse_run(result.run_path)
    ap, ndcg = evaluate_run(entries, data.qrels, k=workspace.ndcg_k,
                            binary_threshold=workspace.binary_threshold)
    assert ap.per_query == result.ap.per_query
    assert ndcg.per_query == result.ndcg.per_query


def test_grid_validation_rejects_small_pool(workspace):
    data = load_experiment(workspace)
    point = GridPoint(fraction=0.5, pool_size=3, alpha=1.0, beta=1.0, k_plus=2, k_minus=3)
    with pytest.raises((ConfigError, ValueError)):
        run_dime(workspace, data, "prf_eclipse", point)


def test_grid_points_enumeration(workspace):
    cfg = workspace
    cfg.validate()
    points = grid_points(cfg, "prf_eclipse")
    assert len(points) == len(cfg.fraction_grid)
    assert len(grid_points(cfg, "prf_dime")) == len(cfg.fraction_grid)
    assert all(p.k_plus == 1 for p in grid_points(cfg, "prf_dime"))
    assert len({p for p in points}) == len(points)


def test_sweep_degenerate_grid_matches_single_run(workspace):
    cfg = workspace
    cfg.fraction_grid = [0.25]
    data = load_experiment(cfg)
    report = sweep(cfg, data, "prf_eclipse")
    assert len(report.rows) == 1
    single = run_dime(
        cfg, data, "prf_eclipse",
        GridPoint(fraction=0.25, pool_size=20, alpha=1.0, beta=1.0, k_plus=1, k_minus=3),
    )
    assert report.rows[0].mean_ap == single.ap.mean
    assert report.rows[0].mean_ndcg == single.ndcg.mean
    assert report.best_by_ap is report.rows[0]


def test_sweep_emits_tables_and_curves(workspace):
    cfg = workspace
    cfg.pool_size_grid = [10, 20]
    data = load_experiment(cfg)
    report = sweep(cfg, data, "prf_dime")
    assert len(report.rows) == 4  # 2 fractions x 2 pool sizes
    assert sorted(report.curve_paths) == report.curve_paths  # monotone naming
    assert all(f"pool{p:08d}" in path for p, path in zip([10, 20], report.curve_paths))
    with open(report.csv_path) as f:
        lines = f.read().strip().splitlines()
    assert len(lines) == 5  # header + one row per point
    with open(report.summary_path) as f:
        summary = json.load(f)
    assert summary["n_points"] == 4
    # every emitted run re-parses and re-evaluates to the reported numbers
    for row in report.rows:
        entries = parse_run(row.run_path)
        ap, ndcg = evaluate_run(entries, data.qrels, k=cfg.ndcg_k,
                                binary_threshold=cfg.binary_threshold)
        assert ap.mean == row.mean_ap
        assert ndcg.mean == row.mean_ndcg


def test_duplicate_grid_values_warn_and_dedupe(workspace):
    cfg = workspace
    cfg.fraction_grid = [0.25, 0.25, 1.0]
    with pytest.warns(UserWarning):
        cfg.validate()
    assert cfg.fraction_grid == [0.25, 1.0]


def test_grid_points_dedupe_without_explicit_validate(workspace):
    cfg = workspace
    cfg.fraction_grid = [0.25, 0.25, 1.0]
    with pytest.warns(UserWarning):
        points = grid_points(cfg, "prf_dime")
    assert len(points) == 2
    assert len(set(points)) == len(points)


def test_sweep_rows_independent_of_execution_order(workspace):
    cfg = workspace
    data = load_experiment(cfg)
    report = sweep(cfg, data, "prf_eclipse")
    # rerunning each point in reverse, each with a fresh pool cache, must
    # reproduce the reported metrics exactly
    for row in reversed(report.rows):
        single = run_dime(cfg, data, "prf_eclipse", row.point)
        assert single.ap.mean == row.mean_ap
        assert single.ndcg.mean == row.mean_ndcg


def test_cosine_pipeline_end_to_end(tmp_path):
    noisy = generate(
        SynthSpec(dim=16, planted_size=4, queries=4, relevant_per_query=3,
                  irrelevant_per_query=17, noise_sigma=0.2, seed=31)
    )
    data_dir = tmp_path / "cos"
    data_dir.mkdir()
    save_matrix(noisy.queries, data_dir / "queries.emb1")
    save_matrix(noisy.corpus, data_dir / "corpus.emb1")
    save_qrels(noisy.qrels, data_dir / "qrels.txt")
    cfg = ExperimentConfig(
        queries_path=str(data_dir / "queries.emb1"),
        corpus_path=str(data_dir / "corpus.emb1"),
        qrels_path=str(data_dir / "qrels.txt"),
        output_dir=str(tmp_path / "out"),
        similarity="cosine",
        alpha_grid=[1.0], beta_grid=[1.0], k_plus_grid=[1], k_minus_grid=[3],
        fraction_grid=[0.5, 1.0], pool_size_grid=[20], rerank_depth=20,
    )
    data = load_experiment(cfg)
    baseline = run_baseline(cfg, data, tag="std")
    assert 0.0 <= baseline.ap.mean <= 1.0
    point = GridPoint(fraction=1.0, pool_size=20, alpha=1.0, beta=1.0,
                      k_plus=1, k_minus=3)
    treated = run_dime(cfg, data, "prf_eclipse", point, tag="std")
    with open(baseline.run_path, "rb") as f:
        base_bytes = f.read()
    with open(treated.run_path, "rb") as f:
        run_bytes = f.read()
    assert base_bytes == run_bytes


def test_config_file_roundtrip_with_sampling(tmp_path):
    cfg = ExperimentConfig(
        queries_path="q", corpus_path="c", qrels_path="r",
        sampling=SamplingConfig(window=30, trials=10, seed=7),
    )
    path = tmp_path / "cfg.json"
    cfg.to_file(path)
    loaded = ExperimentConfig.from_file(path)
    assert loaded == cfg
    with pytest.raises(ConfigError):
        (tmp_path / "bad.json").write_text('{"no_such_key": 1}')
        ExperimentConfig.from_file(tmp_path / "bad.json")


def test_llm_variant_uses_answer_embeddings(workspace, collection, tmp_path):
    answers_path = tmp_path / "answers.emb1"
    save_matrix(collection.queries, answers_path)
    workspace.answers_path = str(answers_path)
    data = load_experiment(workspace)
    point = GridPoint(fraction=0.25, pool_size=20, alpha=1.0, beta=1.0, k_minus=3)
    result = run_dime(workspace, data, "llm_eclipse", point)
    assert result.skipped == ()
    assert all(0.0 <= v <= 1.0 for v in result.ap.per_query.values())

    # a different answers file must change the masks, hence the run
    negated = EmbeddingMatrix(ids=collection.queries.ids, data=-collection.queries.data)
    save_matrix(negated, tmp_path / "answers_neg.emb1")
    workspace.answers_path = str(tmp_path / "answers_neg.emb1")
    flipped = run_dime(workspace, load_experiment(workspace), "llm_eclipse", point,
                       run_path=tmp_path / "out" / "flipped.run")
    with open(result.run_path, "rb") as f:
        original_bytes = f.read()
    with open(flipped.run_path, "rb") as f:
        flipped_bytes = f.read()
    assert original_bytes != flipped_bytes


def test_llm_missing_answer_skips_query(workspace, collection, tmp_path):
    partial = EmbeddingMatrix(
        ids=collection.queries.ids[:-1], data=collection.queries.data[:-1]
    )
    answers_path = tmp_path / "partial.emb1"
    save_matrix(partial, answers_path)
    workspace.answers_path = str(answers_path)
    data = load_experiment(workspace)
    point = GridPoint(fraction=1.0, pool_size=20, alpha=1.0, beta=1.0, k_minus=3)
    result = run_dime(workspace, data, "llm_eclipse", point)
    missing = collection.queries.ids[-1]
    assert result.skipped == (missing,)
    assert result.ap.per_query[missing] == 0.0


def test_llm_variant_requires_answers(workspace):
    data = load_experiment(workspace)
    point = GridPoint(fraction=1.0, pool_size=20, alpha=1.0, beta=1.0, k_minus=3)
    with pytest.raises(ConfigError):
        run_dime(workspace, data, "llm_eclipse", point)


class TestSampleBottom:
    def point(self):
        return GridPoint(fraction=0.25, pool_size=20, alpha=1.0, beta=1.0,
                         k_plus=1, k_minus=3)

    def test_window_equal_k_minus_degenerates(self, workspace):
        workspace.sampling = SamplingConfig(window=3, trials=3, seed=9)
        data = load_experiment(workspace)
        report = sample_bottom(workspace, data, self.point())
        assert report.std_ap == 0.0
        assert report.mean_ap == pytest.approx(report.exact_mean_ap, abs=1e-12)

    def test_fixed_seed_reproducible(self, workspace):
        workspace.sampling = SamplingConfig(window=10, trials=3, seed=4)
        data = load_experiment(workspace)
        first = sample_bottom(workspace, data, self.point())
        second = sample_bottom(workspace, data, self.point())
        assert first.trial_mean_ap == second.trial_mean_ap
        assert first.trial_mean_ndcg == second.trial_mean_ndcg

    def test_window_smaller_than_k_minus_rejected(self, workspace):
        workspace.sampling = SamplingConfig(window=2, trials=3, seed=4)
        data = load_experiment(workspace)
        with pytest.raises(ConfigError):
            sample_bottom(workspace, data, self.point())

    def test_window_larger_than_pool_rejected(self, workspace):
        workspace.sampling = SamplingConfig(window=21, trials=3, seed=4)
        data = load_experiment(workspace)
        with pytest.raises(ConfigError):
            sample_bottom(workspace, data, self.point())


class TestCompareRuns:
    def metric(self, values):
        return MetricResult.from_per_query(values)

    def test_self_comparison_is_degenerate(self):
        rng = np.random.default_rng(3)
        values = {f"q{i}": float(v) for i, v in enumerate(rng.uniform(0.2, 0.8, 10))}
        ap = {"base": self.metric(values), "same": self.metric(dict(values))}
        table = compare_runs(ap, ap, baselines=["base"], treatments=["same"])
        assert table.notes("same") == "n/a vs a"
        assert "n/a" in table.render_text()

    def test_dominating_treatment_annotated(self):
        rng = np.random.default_rng(31)
        qids = [f"q{i:02d}" for i in range(30)]
        base = {q: float(v) for q, v in zip(qids, rng.uniform(0.2, 0.5, 30))}
        treat = {q: min(1.0, base[q] + float(d))
                 for q, d in zip(qids, rng.normal(0.08, 0.02, 30))}
        ap = {"base": self.metric(base), "treat": self.metric(treat)}
        table = compare_runs(ap, ap, baselines=["base"], treatments=["treat"])
        assert table.annotations("treat", "ap") == "a"
        rendered = table.render_text()
        assert "(a)" in rendered

    def test_annotations_match_holm_over_observed_p(self):
        from eclipse.stats import compare_systems, holm_bonferroni

        rng = np.random.default_rng(77)
        qids = [f"q{i:02d}" for i in range(20)]
        base = {q: float(v) for q, v in zip(qids, rng.uniform(0.3, 0.5, 20))}
        treatments = {}
        for name, lift in (("t1", 0.10), ("t2", 0.02), ("t3", 0.0005)):
            treatments[name] = {
                q: min(1.0, base[q] + lift + float(e))
                for q, e in zip(qids, rng.normal(0, 0.01, 20))
            }
        ap = {"base": self.metric(base)}
        ap.update({n: self.metric(v) for n, v in treatments.items()})
        table = compare_runs(ap, ap, baselines=["base"], treatments=list(treatments))
        observed = [
            compare_systems(ap["base"], ap[name]).p_value for name in treatments
        ]
        expected = holm_bonferroni(observed, alpha=0.05)
        got = [table.annotations(name, "ap") == "a" for name in treatments]
        assert got == expected


class TestCli:
    def test_synth_search_eval_compare_roundtrip(self, tmp_path, capsys):
        data_dir = tmp_path / "data"
        assert cli_main([
            "synth", "--dim", "16", "--planted", "4", "--queries", "4",
            "--relevant", "3", "--irrelevant", "17", "--noise-sigma", "0",
            "--seed", "23", "--out-dir", str(data_dir),
        ]) == 0
        cfg = ExperimentConfig(
            queries_path=str(data_dir / "queries.emb1"),
            corpus_path=str(data_dir / "corpus.emb1"),
            qrels_path=str(data_dir / "qrels.txt"),
            output_dir=str(tmp_path / "out"),
            alpha_grid=[1.0], beta_grid=[1.0], k_plus_grid=[1], k_minus_grid=[3],
            fraction_grid=[0.25, 1.0], pool_size_grid=[20], rerank_depth=20,
        )
        cfg_path = tmp_path / "config.json"
        cfg.to_file(cfg_path)

        assert cli_main(["search", "--config", str(cfg_path)]) == 0
        assert cli_main([
            "dime-run", "--config", str(cfg_path), "--variant", "prf_eclipse",
            "--fraction", "0.25", "--alpha", "1.0", "--beta", "1.0",
            "--k-plus", "1", "--k-minus", "3",
        ]) == 0
        assert cli_main(["sweep", "--config", str(cfg_path), "--variant", "prf_dime"]) == 0
        assert cli_main([
            "eval", "--run", str(tmp_path / "out" / "baseline.run"),
            "--qrels", str(data_dir / "qrels.txt"),
        ]) == 0
        eclipse_run = tmp_path / "out" / "prf_eclipse_a1_b1_kp1_km3_f0.25_p20.run"
        assert eclipse_run.exists()
        assert cli_main([
            "compare", "--qrels", str(data_dir / "qrels.txt"),
            "--baseline", f"baseline={tmp_path / 'out' / 'baseline.run'}",
            "--treatment", f"prf_eclipse={eclipse_run}",
        ]) == 0
        out = capsys.readouterr().out
        assert "mAP=1.000000" in out
        assert "system" in out  # comparison table header

    def test_validation_error_exit_code(self, tmp_path):
        cfg = ExperimentConfig(
            queries_path=str(tmp_path / "missing.emb1"),
            corpus_path=str(tmp_path / "missing.emb1"),
            qrels_path=str(tmp_path / "missing.txt"),
            output_dir=str(tmp_path / "out"),
        )
        cfg_path = tmp_path / "bad.json"
        cfg.to_file(cfg_path)
        assert cli_main(["search", "--config", str(cfg_path)]) == 1

    def test_partial_failure_exit_code(self, tmp_path, collection):
        data_dir = tmp_path / "data"
        data_dir.mkdir()
        save_matrix(collection.queries, data_dir / "queries.emb1")
        save_matrix(collection.corpus, data_dir / "corpus.emb1")
        save_qrels(collection.qrels, data_dir / "qrels.txt")
        partial = EmbeddingMatrix(
            ids=collection.queries.ids[:-1], data=collection.queries.data[:-1]
        )
        save_matrix(partial, data_dir / "answers.emb1")
        cfg = ExperimentConfig(
            queries_path=str(data_dir / "queries.emb1"),
            corpus_path=str(data_dir / "corpus.emb1"),
            qrels_path=str(data_dir / "qrels.txt"),
            answers_path=str(data_dir / "answers.emb1"),
            output_dir=str(tmp_path / "out"),
            alpha_grid=[1.0], beta_grid=[1.0], k_plus_grid=[1], k_minus_grid=[3],
            fraction_grid=[1.0], pool_size_grid=[20], rerank_depth=20,
        )
        cfg_path = tmp_path / "config.json"
        cfg.to_file(cfg_path)
        code = cli_main([
            "dime-run", "--config", str(cfg_path), "--variant", "llm_eclipse",
            "--fraction", "1.0", "--alpha", "1.0", "--beta", "1.0", "--k-minus", "3",
        ])
        assert code == 2
