"""Command-line entry point: one corpus in, one feature TSV out.

Exit codes follow the consumer package's convention: 0 success, 1 usage
error, 2 bad data or missing file.  Errors print to stderr as
"error: <message>".
"""

from __future__ import annotations

import argparse
import sys

from .export import POOLING_LAST, POOLINGS, DataError, ExportConfig, export_features


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="embed-export",
        description="Encode mention spans with a pretrained transformer and"
        " write them as a feature TSV.",
    )
    parser.add_argument(
        "--corpus",
        required=True,
        help="mention JSONL with 'context', 'span_start', 'span_end' fields",
    )
    parser.add_argument("--out", required=True, help="output feature TSV path")
    parser.add_argument(
        "--model", required=True, help="encoder name or local model directory"
    )
    parser.add_argument(
        "--pooling",
        choices=list(POOLINGS),
        default=POOLING_LAST,
        help="span pooling scheme (default: %(default)s)",
    )
    parser.add_argument(
        "--batch-size", type=int, default=8, help="sentences per encoder batch"
    )
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        try:
            from transformers.utils import logging as hf_logging

            hf_logging.disable_progress_bar()
        except ImportError:
            pass
        matrix = export_features(
            ExportConfig(
                model_name=args.model,
                pooling=args.pooling,
                corpus_path=args.corpus,
                output_path=args.out,
                batch_size=args.batch_size,
            )
        )
        print(f"wrote {args.out} ({matrix.shape[0]} rows, {matrix.shape[1]} columns)")
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
