"""Command-line harness.

Subcommands:
  synth    generate a synthetic world and write train/test store files
  run      run one method (or --suite for all six) from a JSON config
  report   merge report JSONs into a comparison CSV
  inspect  print shape and class histogram of a store file

Success exits 0; any failure exits nonzero after printing a single
machine-parsable line `error: <Type>: <message>` to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .datastore import (
    METHODS,
    MethodConfig,
    dump_report,
    load_run_config,
    read_report,
    read_store,
    report_to_dict,
    write_report,
    write_store,
)
from .runner import compare_reports, run_experiment, run_suite
from .synthgen import SynthConfig, generate


def _add_synth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--num-classes", type=int, default=SynthConfig.num_classes)
    p.add_argument("--dim", type=int, default=SynthConfig.dim)
    p.add_argument("--train-per-class", type=int, default=SynthConfig.train_per_class)
    p.add_argument("--test-per-class", type=int, default=SynthConfig.test_per_class)
    p.add_argument("--anisotropy", type=float, default=SynthConfig.anisotropy)
    p.add_argument("--cov-coupling", type=float, default=SynthConfig.cov_coupling)
    p.add_argument("--seed", type=int, default=SynthConfig.seed)
    p.add_argument("--clusters", type=int, default=SynthConfig.clusters)
    p.add_argument("--cluster-spread", type=float, default=SynthConfig.cluster_spread)
    p.add_argument("--var-scale", type=float, default=SynthConfig.var_scale)
    p.add_argument("--mix-temperature", type=float, default=SynthConfig.mix_temperature)
    p.add_argument("--radius", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fscil",
        description="Prototype-based few-shot class-incremental learning harness.",
    )
    parser.add_argument("-q", "--quiet", action="store_true",
                        help="suppress progress logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate synthetic train/test stores")
    _add_synth_flags(p_synth)
    p_synth.add_argument("--train-out", required=True)
    p_synth.add_argument("--test-out", required=True)

    p_run = sub.add_parser("run", help="run one method or a whole suite")
    p_run.add_argument("--config", required=True, help="JSON run config path")
    p_run.add_argument("--method", choices=METHODS, help="override method name")
    p_run.add_argument("--seed", type=int, help="override protocol seed")
    p_run.add_argument("--proj-dim", type=int, help="override projection dimension")
    p_run.add_argument("--shots", type=int, help="override shots per incremental class")
    p_run.add_argument("--out", help="override report output path")
    p_run.add_argument("--suite", action="store_true",
                       help="run all six methods over one shared stream")

    p_report = sub.add_parser("report", help="merge reports into a comparison CSV")
    p_report.add_argument("paths", nargs="+", help="report JSON files")
    p_report.add_argument("--out", help="write CSV here instead of stdout")

    p_inspect = sub.add_parser("inspect", help="describe a feature store file")
    p_inspect.add_argument("path")
    return parser


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        num_classes=args.num_classes,
        dim=args.dim,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        anisotropy=args.anisotropy,
        cov_coupling=args.cov_coupling,
        seed=args.seed,
        clusters=args.clusters,
        cluster_spread=args.cluster_spread,
        var_scale=args.var_scale,
        mix_temperature=args.mix_temperature,
        radius=args.radius,
    )
    train, test = generate(cfg)
    write_store(args.train_out, train)
    write_store(args.test_out, test)
    print(f"wrote {args.train_out} ({train.n} rows) and {args.test_out} ({test.n} rows)")
    return 0


def _apply_overrides(cfg, args):
    protocol, method = cfg.protocol, cfg.method
    if args.seed is not None:
        protocol = dataclasses.replace(protocol, seed=args.seed)
    if args.shots is not None:
        protocol = dataclasses.replace(protocol, shots=args.shots)
    if args.method is not None:
        method = dataclasses.replace(method, name=args.method)
    if args.proj_dim is not None:
        method = dataclasses.replace(method, proj_dim=args.proj_dim)
    out = args.out if args.out is not None else cfg.out
    return dataclasses.replace(cfg, protocol=protocol, method=method, out=out)


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args)
    if not args.suite:
        report, meta = run_experiment(cfg)
        if not cfg.out:
            sys.stdout.write(dump_report(report, meta))
        return 0

    train_store = read_store(cfg.train_store)
    test_store = read_store(cfg.test_store)
    methods = [dataclasses.replace(cfg.method, name=name) for name in METHODS]
    results = run_suite(train_store, test_store, cfg.protocol, methods)
    docs = []
    for name, (report, meta) in results.items():
        docs.append(report_to_dict(report, meta))
        if cfg.out:
            stem = Path(cfg.out)
            write_report(stem.with_name(f"{stem.stem}-{name}{stem.suffix}"), report, meta)
    sys.stdout.write(compare_reports(docs))
    return 0


def cmd_report(args) -> int:
    csv = compare_reports([read_report(p) for p in args.paths])
    if args.out:
        Path(args.out).write_text(csv, encoding="utf-8")
    else:
        sys.stdout.write(csv)
    return 0


def cmd_inspect(args) -> int:
    store = read_store(args.path)
    print(f"{args.path}: n={store.n} d={store.d} num_classes={store.num_classes}")
    counts = np.bincount(store.labels, minlength=store.num_classes)
    for class_id, count in enumerate(counts):
        print(f"  class {class_id}: {count} rows")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handlers = {
        "synth": cmd_synth,
        "run": cmd_run,
        "report": cmd_report,
        "inspect": cmd_inspect,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:  # single-line, machine-parsable failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
