"""CLI for converting checkpoints to CBWT + manifest.

Exit codes: 0 success, 2 invalid request/checkpoint content, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .exporter import ExportSpec, export_model
from .format import ExportError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbwt-exporter",
        description="Export checkpoint weight matrices to CBWT files plus a manifest.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="convert one checkpoint")
    p.add_argument("--model", required=True, help="path to a torch checkpoint")
    p.add_argument(
        "--layers",
        default="*",
        help="glob filter on tensor names (rank>=2 tensors only; default *)",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--eval-batch", type=int, default=0, help="also write N eval inputs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--eval-layer", default=None, help="layer for the eval batch (default: first exported)"
    )
    p.add_argument(
        "--input-width", type=int, default=None, help="assert the eval layer's in-features"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec_args = dict(
        model=args.model,
        layers=args.layers,
        out_dir=args.out,
        eval_batch=args.eval_batch,
        seed=args.seed,
        eval_layer=args.eval_layer,
        input_width=args.input_width,
    )
    try:
        manifest = export_model(ExportSpec(**spec_args))
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3
    sys.stdout.write(str(manifest) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
