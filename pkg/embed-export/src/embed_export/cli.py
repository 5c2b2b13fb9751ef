"""Command-line entry point.

Exit codes: 0 success, 2 configuration/encoder error, 3 data error.
"""
from __future__ import annotations

import argparse
import sys

from .core import ExportJob, EncoderError, ExportError, export

EXIT_CONFIG = 2
EXIT_DATA = 3


def build_parser():
    p = argparse.ArgumentParser(
        prog="embed-export",
        description="Encode review texts from a canonical dataset file into "
                    "a binary embedding file.")
    p.add_argument("--input", required=True, help="canonical dataset JSONL")
    p.add_argument("--model", required=True,
                   help="pretrained encoder id, or hash:<dim> for the offline "
                        "deterministic encoder")
    p.add_argument("--out", required=True, help="output embedding file")
    p.add_argument("--batch", type=int, default=32, help="inference batch size")
    p.add_argument("--pooling", choices=["mean", "cls"], default="mean")
    p.add_argument("--expect-dim", type=int,
                   help="fail unless the encoder's output dimension matches")
    p.add_argument("--device", default="cpu")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        job = ExportJob(input_path=args.input, model=args.model,
                        output_path=args.out, batch_size=args.batch,
                        pooling=args.pooling, expect_dim=args.expect_dim,
                        device=args.device)
    except ExportError as e:  # invalid job settings
        print(f"embed-export: error: {e}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)
    try:
        count, dim = export(job)
    except EncoderError as e:
        print(f"embed-export: error: {e}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)
    except (ExportError, FileNotFoundError) as e:
        print(f"embed-export: error: {e}", file=sys.stderr)
        sys.exit(EXIT_DATA)
    print(f"wrote {count} embeddings (dim {dim}) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
