"""Command line: itxe-export --corpus <tsv> --id <corpus_id> --model <name> --out <itxe>."""

from __future__ import annotations

import argparse
import sys

from .export import ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itxe-export",
        description="Embed a verse corpus and write an ITXE vector store.",
    )
    parser.add_argument("--corpus", required=True, help="corpus TSV file")
    parser.add_argument("--id", required=True, dest="corpus_id", help="corpus id for the store keys")
    parser.add_argument(
        "--model", required=True,
        help="sentence-transformers model name, or hash:<dim> for the builtin encoder",
    )
    parser.add_argument("--out", required=True, help="output .itxe path")
    parser.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        corpus_path=args.corpus,
        corpus_id=args.corpus_id,
        model=args.model,
        out_path=args.out,
        batch_size=args.batch_size,
    )
    try:
        out = export(job)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out} and {out}.meta.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
