"""Command line: fscil-export export --data DIR --split train --out PATH."""

import argparse
import logging
import sys

from .errors import ExporterError
from .export import ExportJob, run_export


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fscil-export")
    p.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    ex = sub.add_parser("export", help="extract features to a store file")
    ex.add_argument("--data", required=True, help="dataset root (class-per-folder)")
    ex.add_argument("--split", required=True, choices=("train", "test"))
    ex.add_argument("--out", required=True)
    ex.add_argument("--checkpoint", default=None,
                    help="state-dict file; default: torchvision pretrained")
    ex.add_argument("--batch", type=int, default=16)
    ex.add_argument("--device", default="cpu")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        stream=sys.stderr, format="%(levelname)s %(message)s")
    job = ExportJob(data_root=args.data, split=args.split, out=args.out,
                    checkpoint=args.checkpoint, batch=args.batch,
                    device=args.device)
    try:
        result = run_export(job)
    except ExporterError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"n={result.n} d={result.d} classes={result.num_classes} "
          f"skipped={result.skipped}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
