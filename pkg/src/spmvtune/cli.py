"""Command-line entry point.

Subcommands: bench, dataset, predict, solve, compare, report. Exit codes:
0 success, 2 usage, 3 input data error, 4 numerical failure. Worker count
can be overridden with the SPMVTUNE_WORKERS environment variable.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .bench import (DEFAULT_RUNS, DEFAULT_WARMUPS, build_dataset,
                    compare_solvers, time_all_configs)
from .errors import MatrixMarketError, SolverNumericalError, SpmvTuneError
from .features import extract_features
from .formats import FormatTag, convert
from .inference import CascadeModelSet, cascade_predict, softmax
from .mmio import load_matrix_market
from .solver import GmresParams, async_solve, gmres_solve, sequential_predict_solve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _add_gmres_flags(p: argparse.ArgumentParser):
    p.add_argument("--restart", type=int, default=30, help="restart length")
    p.add_argument("--tol", type=float, default=1e-8,
                   help="relative residual tolerance")
    p.add_argument("--max-iters", type=int, default=1000,
                   help="total Arnoldi step budget")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the random right-hand side")
    p.add_argument("--rhs", choices=["ones", "random"], default="ones",
                   help="right-hand side policy when b is not supplied")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spmvtune",
        description="SpMV configuration tuning: benchmark, predict, and solve")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="time every configuration on a matrix")
    p.add_argument("matrix", help="path to a .mtx file")
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    p.add_argument("--warmups", type=int, default=DEFAULT_WARMUPS)
    p.add_argument("--out", default=None, help="write the timing JSON here")

    p = sub.add_parser("dataset",
                       help="build the five labeled training CSVs")
    p.add_argument("matrix_dir", help="directory of .mtx files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    p.add_argument("--warmups", type=int, default=DEFAULT_WARMUPS)

    p = sub.add_parser("predict",
                       help="run the cascade on a matrix and print decisions")
    p.add_argument("matrix", help="path to a .mtx file")
    p.add_argument("--models", required=True, help="model directory")

    p = sub.add_parser("solve", help="run GMRES on a matrix")
    p.add_argument("matrix", help="path to a .mtx file")
    p.add_argument("--mode", choices=["default", "seq", "async"],
                   default="default")
    p.add_argument("--models", default=None,
                   help="model directory (required for seq/async)")
    p.add_argument("--out", default=None, help="directory for the report JSON")
    _add_gmres_flags(p)

    p = sub.add_parser("compare",
                       help="run default, sequential, and async solves")
    p.add_argument("matrix", help="path to a .mtx file")
    p.add_argument("--models", required=True)
    p.add_argument("--out", default=None, help="directory for the report JSON")
    _add_gmres_flags(p)

    p = sub.add_parser("report",
                       help="summarize stored comparison reports as a table")
    p.add_argument("report_dir", help="directory of *_compare.json files")
    p.add_argument("--out", default=None, help="write a CSV summary here")
    return parser


def _load_matrix(path_str: str):
    path = Path(path_str)
    if not path.exists():
        raise SpmvTuneError(f"matrix file not found: {path}")
    coo = load_matrix_market(path)
    if coo.nnz == 0:
        raise SpmvTuneError(f"matrix {path.name} has no entries")
    return coo, path.stem


def _load_models(dir_str: str | None) -> CascadeModelSet:
    if dir_str is None:
        raise SpmvTuneError("--models is required for this mode")
    return CascadeModelSet.load_dir(dir_str)


def _params_from(args) -> GmresParams:
    return GmresParams(restart_m=args.restart, tol=args.tol,
                       max_iters=args.max_iters, rhs=args.rhs, seed=args.seed)


def _cmd_bench(args) -> int:
    coo, matrix_id = _load_matrix(args.matrix)
    record = time_all_configs(coo, matrix_id, args.runs, args.warmups)
    width = max(len(t) for t in record.times)
    for token, seconds in record.times.items():
        shown = "inapplicable" if seconds is None else f"{seconds * 1e6:12.3f} us"
        print(f"{token:<{width}}  {shown}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(record.to_dict(), indent=1))
        print(f"wrote {out}")
    return EXIT_OK


def _cmd_dataset(args) -> int:
    counts = build_dataset(args.matrix_dir, args.out, args.runs, args.warmups)
    for name, count in counts.items():
        print(f"{name}: {count} rows")
    return EXIT_OK


def _cmd_predict(args) -> int:
    coo, matrix_id = _load_matrix(args.matrix)
    models = _load_models(args.models)
    t0 = time.perf_counter()
    fv = extract_features(convert(coo, FormatTag.CSR))
    t_features = time.perf_counter() - t0

    decisions = []
    t0 = time.perf_counter()
    final = cascade_predict(models, fv, decisions.append)
    t_cascade = time.perf_counter() - t0

    print(f"matrix {matrix_id}: features in {t_features * 1e3:.3f} ms, "
          f"cascade in {t_cascade * 1e3:.3f} ms")
    for d in decisions:
        terminal = " (terminal)" if d.is_terminal else ""
        print(f"  {d.stage.value}: {d.implied_config().token()}{terminal}  "
              f"[{_scores_str(d.scores)}]")
    print(f"final: {final.token()}")
    return EXIT_OK


def _scores_str(scores: dict[str, float]) -> str:
    labels = list(scores)
    probs = softmax(np.array([scores[k] for k in labels]))
    return " ".join(f"{lab}={p:.3f}" for lab, p in zip(labels, probs))


def _cmd_solve(args) -> int:
    coo, matrix_id = _load_matrix(args.matrix)
    params = _params_from(args)
    if args.mode == "default":
        report = gmres_solve(coo, None, params)
    elif args.mode == "seq":
        report = sequential_predict_solve(coo, None, params,
                                          _load_models(args.models))
    else:
        report = async_solve(coo, None, params, _load_models(args.models))
    report.matrix_id = matrix_id
    status = "converged" if report.converged else "not converged"
    print(f"{matrix_id}: {status} in {report.iterations} iterations, "
          f"final residual {report.final_residual!r}, "
          f"wall {report.wall_seconds:.4f} s")
    for swap in report.config_timeline:
        print(f"  iteration {swap.iteration}: {swap.config.token()} "
              f"(swap cost {swap.swap_cost_seconds * 1e3:.3f} ms)")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        out = out_dir / f"{matrix_id}_{args.mode}_report.json"
        out.write_text(json.dumps(report.to_dict(), indent=1))
        print(f"wrote {out}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    coo, matrix_id = _load_matrix(args.matrix)
    comparison = compare_solvers(coo, _params_from(args),
                                 _load_models(args.models),
                                 matrix_id=matrix_id)
    print(f"{matrix_id}:")
    for label, rep in (("default", comparison.default),
                       ("sequential", comparison.sequential),
                       ("async", comparison.async_)):
        swaps = ", ".join(f"{s.iteration}:{s.config.token()}"
                          for s in rep.config_timeline)
        print(f"  {label:<10} wall {rep.wall_seconds:.4f} s  "
              f"iters {rep.iterations}  timeline [{swaps}]")
    print(f"  speedup vs default: sequential {comparison.speedup_sequential:.2f}x, "
          f"async {comparison.speedup_async:.2f}x")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        out = out_dir / f"{matrix_id}_compare.json"
        out.write_text(json.dumps(comparison.to_dict(), indent=1))
        print(f"wrote {out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    report_dir = Path(args.report_dir)
    paths = sorted(report_dir.glob("*_compare.json"))
    if not paths:
        raise SpmvTuneError(f"no *_compare.json files in {report_dir}")
    rows = []
    for path in paths:
        doc = json.loads(path.read_text())
        final_cfg = doc["async"]["config_timeline"][-1]["config"]
        swap_iters = [s["iteration"]
                      for s in doc["async"]["config_timeline"][1:]]
        rows.append({
            "matrix": doc["matrix_id"],
            "default_s": doc["default"]["wall_seconds"],
            "sequential_s": doc["sequential"]["wall_seconds"],
            "async_s": doc["async"]["wall_seconds"],
            "speedup_sequential": doc["speedup_sequential"],
            "speedup_async": doc["speedup_async"],
            "final_config": final_cfg,
            "swap_iterations": ";".join(str(i) for i in swap_iters),
        })
    header = (f"{'matrix':<20} {'default':>10} {'seq':>10} {'async':>10} "
              f"{'seq x':>7} {'async x':>8}  final config")
    print(header)
    print("-" * len(header))
    for r in rows:
        print(f"{r['matrix']:<20} {r['default_s']:>10.4f} "
              f"{r['sequential_s']:>10.4f} {r['async_s']:>10.4f} "
              f"{r['speedup_sequential']:>7.2f} {r['speedup_async']:>8.2f}  "
              f"{r['final_config']}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {out}")
    return EXIT_OK


_COMMANDS = {
    "bench": _cmd_bench,
    "dataset": _cmd_dataset,
    "predict": _cmd_predict,
    "solve": _cmd_solve,
    "compare": _cmd_compare,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SolverNumericalError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MatrixMarketError, SpmvTuneError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
