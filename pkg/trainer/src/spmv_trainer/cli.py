"""Trainer command line: train, compare, export-fixture."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .compare import FAMILIES, compare_families, format_table
from .schema import MODEL_NAMES, dump_model
from .synthetic import synthetic_suite
from .train import (DATASET_FILES, TrainConfig, TrainerError, heldout_dump,
                    read_dataset, train_models, train_one)


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--trees", type=int, default=60)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--test-fraction", type=float, default=0.2)


def _config_from(args) -> TrainConfig:
    return TrainConfig(seed=args.seed, test_fraction=args.test_fraction,
                       n_trees=args.trees, max_depth=args.depth,
                       learning_rate=args.lr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spmv-trainer",
        description="Train the five cascade classifiers from harness CSVs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train all five models")
    p.add_argument("--data", required=True, help="directory of the five CSVs")
    p.add_argument("--out", required=True, help="output directory")
    _add_train_flags(p)

    p = sub.add_parser("compare",
                       help="accuracy/latency table across classifier families")
    p.add_argument("--data", required=True, help="one dataset CSV")
    p.add_argument("--out", default=None, help="write the table JSON here")
    p.add_argument("--families", nargs="+", default=FAMILIES,
                   choices=FAMILIES)
    _add_train_flags(p)

    p = sub.add_parser("export-fixture",
                       help="train on the synthetic suite and export models "
                            "plus the held-out prediction dump")
    p.add_argument("--out", required=True)
    p.add_argument("--rows", type=int, default=5000)
    _add_train_flags(p)
    return parser


def _cmd_train(args) -> int:
    metrics = train_models(Path(args.data), Path(args.out), _config_from(args))
    for name, m in metrics.items():
        flag = " (degenerate split)" if m.degenerate_split else ""
        print(f"{name}: accuracy {m.test_accuracy:.4f} on {m.test_rows} "
              f"held-out rows{flag}")
    print(f"wrote models, metrics.json, heldout_predictions.json to {args.out}")
    return 0


def _cmd_compare(args) -> int:
    frame = read_dataset(Path(args.data))
    results = compare_families(frame, _config_from(args), args.families)
    print(format_table(results))
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps([r.to_dict() for r in results], indent=1))
        print(f"wrote {out}")
    return 0


def _cmd_export_fixture(args) -> int:
    config = _config_from(args)
    suite = synthetic_suite(seed=config.seed, n=args.rows)
    out_dir = Path(args.out)
    models_dir = out_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    docs, heldout = {}, {}
    for name in MODEL_NAMES:
        doc, metrics, test = train_one(suite[name], config, name)
        docs[name] = doc
        heldout[name] = test
        dump_model(doc, models_dir / f"{name}.json")
        print(f"{name}: accuracy {metrics.test_accuracy:.4f} on "
              f"{metrics.test_rows} held-out rows")
    (out_dir / "heldout_predictions.json").write_text(
        json.dumps(heldout_dump(docs, heldout), sort_keys=True) + "\n")
    print(f"wrote fixture under {out_dir}")
    return 0


_COMMANDS = {"train": _cmd_train, "compare": _cmd_compare,
             "export-fixture": _cmd_export_fixture}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except TrainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
