"""Command line entry point: ``dfr gen|train|eval|ablate``."""
from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources

import numpy as np

from ..errors import ConfigurationError, DataError, DFRError, NumericError, StorageError
from ..network import load_checkpoint, save_checkpoint
from ..trainer import TrainConfig, ablation_suite, evaluate, train
from .io import load_config, load_features, write_features, write_metrics, write_table
from .synthetic import SyntheticSpec, generate_synthetic

EXIT_CODES = {ConfigurationError: 2, DataError: 3, NumericError: 4, StorageError: 5}


def default_config_path(name: str = "default.cfg"):
    return resources.files("dfr").joinpath("data", name)


def _train_config(path) -> TrainConfig:
    cfg = load_config(TrainConfig, path or default_config_path())
    cfg.validate()
    return cfg


def cmd_gen(args) -> None:
    spec = load_config(SyntheticSpec, args.spec) if args.spec else SyntheticSpec()
    if args.seed is not None:
        spec = SyntheticSpec(**{**spec.__dict__, "seed": args.seed})
    source, target = generate_synthetic(spec)
    write_features(source, args.out_source)
    write_features(target, args.out_target)
    print(f"wrote {source.n} source and {target.n} target rows (d={source.dim}, C={spec.classes})")


def cmd_train(args) -> None:
    cfg = _train_config(args.config)
    toggles = {}
    if args.disable_registration:
        toggles["enable_R"] = False
    if args.disable_histogram:
        toggles["enable_H"] = False
    if args.disable_pseudo:
        toggles["enable_T"] = False
    if args.seed is not None:
        toggles["seed"] = args.seed
    cfg = cfg.replace(**toggles)
    source = load_features(args.source, "source")
    target = load_features(args.target, "target")
    params, history = train(cfg, source, target)
    write_metrics(history, args.out_metrics)
    save_checkpoint(params, args.out_checkpoint)
    if history.records and target.labeled:
        print(f"final target accuracy {history.records[-1].target_accuracy:.4f}")
    print(f"trained {len(history)} epochs; metrics -> {args.out_metrics}, checkpoint -> {args.out_checkpoint}")


def cmd_eval(args) -> None:
    params = load_checkpoint(args.checkpoint)
    data = load_features(args.data)
    if data.dim != params.input_dim:
        raise ConfigurationError(f"data width {data.dim} != checkpoint input width {params.input_dim}")
    acc, per_class = evaluate(params, data)
    print(f"accuracy {acc:.6f}")
    for c, a in enumerate(per_class):
        if not np.isnan(a):
            print(f"class {c} {a:.6f}")


def cmd_ablate(args) -> None:
    cfg = _train_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    source = load_features(args.source, "source")
    target = load_features(args.target, "target")
    rows = ablation_suite(cfg, source, target)
    write_table(
        [(r.variant, r.accuracy, int(r.enable_R), int(r.enable_H), int(r.enable_T)) for r in rows],
        ("variant", "accuracy", "enable_R", "enable_H", "enable_T"),
        args.out,
    )
    for r in rows:
        print(f"{r.variant:<10} {r.accuracy:.4f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic shifted source/target pair")
    p.add_argument("--spec", help="synthetic spec file (key = value)")
    p.add_argument("--out-source", required=True)
    p.add_argument("--out-target", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train on source/target feature CSVs")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--config", help="training config (defaults to the shipped default.cfg)")
    p.add_argument("--out-metrics", required=True)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--disable-registration", action="store_true")
    p.add_argument("--disable-histogram", action="store_true")
    p.add_argument("--disable-pseudo", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a labeled feature CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run every component combination and tabulate accuracy")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except DFRError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        for cls, code in EXIT_CODES.items():
            if isinstance(exc, cls):
                return code
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
