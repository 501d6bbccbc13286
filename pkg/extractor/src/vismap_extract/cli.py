"""Command line interface: vismap-extract."""

from __future__ import annotations

import argparse
import sys

from .backbones import available_backbones
from .extract import ExtractorConfig, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vismap-extract",
        description="Embed an image folder into a traversal bundle.",
    )
    parser.add_argument("--images", required=True, help="directory of images")
    parser.add_argument("--meta", help="per-frame metadata CSV")
    parser.add_argument(
        "--backbone",
        default="tiny",
        help=f"backbone name, one of {', '.join(available_backbones())}",
    )
    parser.add_argument("--image-size", type=int, help="override the backbone input size")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument(
        "--skip-undecodable",
        action="store_true",
        help="skip images that fail to decode instead of aborting",
    )
    parser.add_argument("--out", required=True, help="output bundle directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = ExtractorConfig(
        backbone=args.backbone,
        image_size=args.image_size,
        batch_size=args.batch_size,
        metadata_csv=args.meta,
        fail_fast=not args.skip_undecodable,
    )
    try:
        out = extract(args.images, config, args.out)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote bundle to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
