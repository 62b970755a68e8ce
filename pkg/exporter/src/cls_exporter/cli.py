"""Command-line entry point for the embedding exporter.

Exit codes: 0 ok, 1 usage, 2 data error, 3 encoder failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_MODEL,
    DataError,
    ExportRequest,
    InternalError,
    export,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract reserves 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cls-export", description=__doc__)
    parser.add_argument("--input", required=True, help="corpus JSONL to embed")
    parser.add_argument("--output", required=True, help="embedding JSONL to write")
    parser.add_argument(
        "--model", default=DEFAULT_MODEL, help="encoder checkpoint id or path"
    )
    parser.add_argument(
        "--max-tokens",
        type=int,
        default=DEFAULT_MAX_TOKENS,
        help="subword budget per test (start/end markers included)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="compute threads; 1 keeps outputs byte-reproducible",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    request = ExportRequest(
        input_path=Path(args.input),
        output_path=Path(args.output),
        model=args.model,
        max_tokens=args.max_tokens,
        threads=args.threads,
    )
    try:
        report = export(request)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    dim = report.dim if report.dim is not None else 0
    print(
        f"exported {report.exported} rows (dim {dim}), "
        f"{report.errors} error(s), {report.truncated} truncated"
    )
    if report.errors or report.truncated:
        print(f"details: {report.errors_path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
