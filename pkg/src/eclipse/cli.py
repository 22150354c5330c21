"""Command-line entry points.

Subcommands: synth, search, dime-run, sweep, sample-bottom, eval, compare.
Exit codes: 0 success, 1 validation error, 2 partial failure (some queries
were skipped but the run completed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, SamplingConfig
from .metrics import evaluate_run
from .runner import (
    GridPoint,
    VARIANTS,
    compare_runs,
    load_experiment,
    run_baseline,
    run_dime,
    sample_bottom,
    sweep,
)
from .store import save_matrix
from .synthgen import SynthSpec, generate
from .trec import parse_qrels, parse_run, save_qrels


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config JSON")


def _add_point_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fraction", type=float, default=0.5)
    parser.add_argument("--pool-size", type=int, default=None,
                        help="defaults to the first pool size in the config grid")
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--k-plus", type=int, default=None)
    parser.add_argument("--k-minus", type=int, default=None)


def _point_from_args(cfg: ExperimentConfig, args: argparse.Namespace) -> GridPoint:
    return GridPoint(
        fraction=args.fraction,
        pool_size=args.pool_size if args.pool_size is not None else cfg.pool_size_grid[0],
        alpha=args.alpha,
        beta=args.beta,
        k_plus=args.k_plus,
        k_minus=args.k_minus,
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eclipse",
        description="Query-dependent dimension selection experiments for dense retrieval",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic planted-subspace collection")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--planted", type=int, required=True)
    p.add_argument("--queries", type=int, required=True)
    p.add_argument("--relevant", type=int, required=True)
    p.add_argument("--irrelevant", type=int, required=True)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--signal-mean", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("binary", "jsonl"), default="binary")

    p = sub.add_parser("search", help="full-dimensional baseline retrieval")
    _add_config_arg(p)
    p.add_argument("--tag", default="baseline")

    p = sub.add_parser("dime-run", help="one estimator run at one grid point")
    _add_config_arg(p)
    p.add_argument("--variant", choices=VARIANTS, required=True)
    _add_point_args(p)
    p.add_argument("--tag", default=None)

    p = sub.add_parser("sweep", help="evaluate every grid point for a variant")
    _add_config_arg(p)
    p.add_argument("--variant", choices=VARIANTS, required=True)

    p = sub.add_parser("sample-bottom", help="random bottom-window moon sampling study")
    _add_config_arg(p)
    p.add_argument("--variant", choices=("prf_eclipse", "llm_eclipse"), default="prf_eclipse")
    _add_point_args(p)
    p.add_argument("--window", type=int, default=None, help="overrides the config window")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("eval", help="evaluate a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--ndcg-k", type=int, default=10)
    p.add_argument("--threshold", type=int, default=2)
    p.add_argument("--out", default=None, help="optional JSON output path")

    p = sub.add_parser("compare", help="significance table of treatments vs baselines")
    p.add_argument("--qrels", required=True)
    p.add_argument("--baseline", action="append", default=[], metavar="NAME=RUN",
                   help="baseline run file, repeatable")
    p.add_argument("--treatment", action="append", default=[], metavar="NAME=RUN",
                   help="treatment run file, repeatable")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--ndcg-k", type=int, default=10)
    p.add_argument("--threshold", type=int, default=2)
    p.add_argument("--out", default=None, help="optional text output path")
    return parser


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        dim=args.dim,
        planted_size=args.planted,
        queries=args.queries,
        relevant_per_query=args.relevant,
        irrelevant_per_query=args.irrelevant,
        noise_sigma=args.noise_sigma,
        signal_mean=args.signal_mean,
        seed=args.seed,
    )
    collection = generate(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = "emb1" if args.format == "binary" else "jsonl"
    save_matrix(collection.queries, out_dir / f"queries.{suffix}", args.format)
    save_matrix(collection.corpus, out_dir / f"corpus.{suffix}", args.format)
    save_qrels(collection.qrels, out_dir / "qrels.txt")
    with open(out_dir / "planted.json", "w", encoding="utf-8") as f:
        json.dump({qid: list(dims) for qid, dims in collection.planted.items()}, f, indent=2)
        f.write("\n")
    print(
        f"wrote {collection.queries.n} queries, {collection.corpus.n} docs "
        f"(dim={spec.dim}) to {out_dir}"
    )
    return 0


def _cmd_search(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    data = load_experiment(cfg)
    result = run_baseline(cfg, data, tag=args.tag)
    print(f"run: {result.run_path}")
    print(f"mAP={result.ap.mean:.6f} nDCG@{cfg.ndcg_k}={result.ndcg.mean:.6f}")
    return 0


def _cmd_dime_run(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    data = load_experiment(cfg)
    point = _point_from_args(cfg, args)
    result = run_dime(cfg, data, args.variant, point, tag=args.tag)
    print(f"run: {result.run_path}")
    print(f"mAP={result.ap.mean:.6f} nDCG@{cfg.ndcg_k}={result.ndcg.mean:.6f}")
    if result.skipped:
        print(f"skipped queries: {', '.join(result.skipped)}", file=sys.stderr)
        return 2
    return 0


def _cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    data = load_experiment(cfg)
    report = sweep(cfg, data, args.variant)
    print(f"evaluated {len(report.rows)} grid points, table: {report.csv_path}")
    best_ap = report.best_by_ap
    best_ndcg = report.best_by_ndcg
    print(f"best mAP      {best_ap.mean_ap:.6f} at {best_ap.point.slug()}")
    print(f"best nDCG@{cfg.ndcg_k:<3} {best_ndcg.mean_ndcg:.6f} at {best_ndcg.point.slug()}")
    if any(row.skipped for row in report.rows):
        return 2
    return 0


def _cmd_sample_bottom(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.window is not None or args.trials is not None or args.seed is not None:
        base = cfg.sampling or SamplingConfig(window=30, trials=10, seed=0)
        cfg.sampling = SamplingConfig(
            window=args.window if args.window is not None else base.window,
            trials=args.trials if args.trials is not None else base.trials,
            seed=args.seed if args.seed is not None else base.seed,
        )
    data = load_experiment(cfg)
    point = _point_from_args(cfg, args)
    report = sample_bottom(cfg, data, point, variant=args.variant)
    print(report.render_text())
    return 0


def _cmd_eval(args) -> int:
    entries = parse_run(args.run)
    qrels = parse_qrels(args.qrels)
    ap, ndcg = evaluate_run(entries, qrels, k=args.ndcg_k, binary_threshold=args.threshold)
    print(f"mAP={ap.mean:.6f} nDCG@{args.ndcg_k}={ndcg.mean:.6f} queries={len(ap.per_query)}")
    if args.out:
        payload = {
            "map": ap.mean,
            f"ndcg@{args.ndcg_k}": ndcg.mean,
            "per_query": {
                qid: {"ap": ap.per_query[qid], "ndcg": ndcg.per_query[qid]}
                for qid in sorted(ap.per_query)
            },
        }
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    return 0


def _parse_named_runs(pairs: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected NAME=RUN, got {pair!r}")
        name, path = pair.split("=", 1)
        if name in out:
            raise ConfigError(f"duplicate system name {name!r}")
        out[name] = path
    return out


def _cmd_compare(args) -> int:
    if not args.baseline or not args.treatment:
        raise ConfigError("compare needs at least one --baseline and one --treatment")
    qrels = parse_qrels(args.qrels)
    baselines = _parse_named_runs(args.baseline)
    treatments = _parse_named_runs(args.treatment)
    overlap = set(baselines) & set(treatments)
    if overlap:
        raise ConfigError(f"systems listed as both baseline and treatment: {sorted(overlap)}")
    ap: dict = {}
    ndcg: dict = {}
    for name, path in {**baselines, **treatments}.items():
        entries = parse_run(path)
        ap[name], ndcg[name] = evaluate_run(
            entries, qrels, k=args.ndcg_k, binary_threshold=args.threshold
        )
    table = compare_runs(
        ap, ndcg, list(baselines), list(treatments), alpha=args.alpha
    )
    text = table.render_text()
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "search": _cmd_search,
    "dime-run": _cmd_dime_run,
    "sweep": _cmd_sweep,
    "sample-bottom": _cmd_sample_bottom,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
