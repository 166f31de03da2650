"""Command-line surface: batch embedding runs and the oracle server."""

from __future__ import annotations

import argparse
import logging
import sys

from .backbone import DEFAULT_MODEL, ModelError
from .oracle import OracleSettings, serve_oracle
from .pipeline import DataError, EmbedJob, embed_images


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-service",
        description="Turn images into [CLS]-pooled embedding files, or serve "
                    "the masked-pair similarity oracle on stdio.")
    parser.add_argument("--images", nargs="+", metavar="PATH",
                        help="image files and/or directories to embed")
    parser.add_argument("--out", metavar="PATH", help="output embedding file")
    parser.add_argument("--ids-out", metavar="PATH", help="output ids file")
    parser.add_argument("--batch", type=int, default=16,
                        help="images per forward pass (default 16)")
    parser.add_argument("--serve-oracle", nargs=2, metavar=("IMAGE_A", "IMAGE_B"),
                        help="serve the similarity oracle for one image pair")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="model name or local checkpoint directory")
    parser.add_argument("--device", help="torch device (default cpu)")
    parser.add_argument("--cell", type=int, default=64,
                        help="oracle mask cell size in pixels (default 64)")
    parser.add_argument("--size", type=int, default=512,
                        help="oracle working canvas in pixels (default 512)")
    parser.add_argument("--sigma", type=float,
                        help="oracle blur std in pixels (default cell/4)")
    return parser


def main(argv: list[str] | None = None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)

    if bool(args.serve_oracle) == bool(args.images):
        parser.error("pass exactly one of --images or --serve-oracle")
    if args.images and not (args.out and args.ids_out):
        parser.error("--images requires --out and --ids-out")
    if args.batch < 1:
        parser.error(f"--batch must be >= 1, got {args.batch}")

    try:
        if args.serve_oracle:
            settings = OracleSettings(model=args.model, device=args.device,
                                      cell=args.cell, size=args.size,
                                      sigma=args.sigma)
            return serve_oracle(args.serve_oracle[0], args.serve_oracle[1],
                                settings)
        job = EmbedJob(images=args.images, out=args.out, ids_out=args.ids_out,
                       batch_size=args.batch, model=args.model,
                       device=args.device)
        report = embed_images(job)
        for path, reason in report.skipped:
            print(f"skipped {path}: {reason}", file=sys.stderr)
        return 0
    except (DataError, ModelError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1
