#!/usr/bin/env python3
"""Plot AP against the retained-dimension fraction, one curve per pool size.

Reads the curve CSV files a sweep emits (curve_<variant>_pool*.csv) and
writes a PNG next to them.

Usage:
    python scripts/plot_retained_fraction_curves.py runs/synthetic --variant prf_eclipse
"""

import argparse
import csv
import re
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", help="sweep output directory")
    parser.add_argument("--variant", default="prf_eclipse")
    parser.add_argument("--metric", choices=("ap", "ndcg"), default="ap")
    args = parser.parse_args(argv)

    out_dir = Path(args.out_dir)
    pattern = re.compile(rf"curve_{re.escape(args.variant)}_pool(\d+)\.csv")
    curves = sorted(
        (int(m.group(1)), path)
        for path in out_dir.iterdir()
        if (m := pattern.fullmatch(path.name))
    )
    if not curves:
        print(f"no curve files for variant {args.variant!r} in {out_dir}", file=sys.stderr)
        return 1

    column = "best_mean_ap" if args.metric == "ap" else "best_mean_ndcg"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for pool_size, path in curves:
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        fractions = [100 * float(r["fraction"]) for r in rows]
        values = [float(r[column]) for r in rows]
        ax.plot(fractions, values, marker="o", label=f"pool size {pool_size}")
    ax.set_xlabel("retained dimensions (%)")
    ax.set_ylabel("mAP" if args.metric == "ap" else "nDCG@10")
    ax.set_title(f"{args.variant}: effectiveness vs retained fraction")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    target = out_dir / f"curves_{args.variant}_{args.metric}.png"
    fig.savefig(target, dpi=150)
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
