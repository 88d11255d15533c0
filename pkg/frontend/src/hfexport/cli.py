"""hf-export command line: convert a hub model directory to PRNC1."""

from __future__ import annotations

import argparse
import logging
import sys

from .export import ExportError, export
from .mapping import UnmappedTensorError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hf-export",
        description="Convert a BERT-family hub checkpoint directory "
                    "(config.json + weights + vocab.txt) into the PRNC1 "
                    "interchange format.")
    parser.add_argument("--model", required=True,
                        help="source model directory (hub layout)")
    parser.add_argument("--out", required=True, help="output checkpoint path")
    parser.add_argument("--vocab-out",
                        help="vocab destination (default: next to --out)")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = export(args.model, args.out, args.vocab_out)
    except (ExportError, UnmappedTensorError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"exported {summary['num_layers']}-layer model: "
          f"{summary['tensors']} tensors"
          + (f", skipped {len(summary['skipped'])}" if summary['skipped'] else ""))
    return 0


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
