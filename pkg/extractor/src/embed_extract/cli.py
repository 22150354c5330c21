"""Command line: encode a TSV of (id, text) rows into an embedding file."""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractJob, InputError, run_extract


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-extract",
        description="Encode an id<TAB>text collection into an EMB1 or JSONL embedding file",
    )
    parser.add_argument("--model", required=True,
                        help="registry name (ance, contriever, tas-b), or hash:<dim> "
                             "for the offline deterministic encoder")
    parser.add_argument("--input", required=True, help="TSV file of id<TAB>text rows")
    parser.add_argument("--output", required=True, help="output matrix path")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--format", choices=("binary", "jsonl"), default="binary")
    args = parser.parse_args(argv)

    try:
        manifest = run_extract(
            ExtractJob(
                model_id=args.model,
                input_path=args.input,
                output_path=args.output,
                batch_size=args.batch_size,
                device=args.device,
                output_format=args.format,
            )
        )
    except (InputError, KeyError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {manifest['rows']} rows (dim={manifest['dim']}, "
        f"pooling={manifest['pooling']}) to {manifest['output']}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
