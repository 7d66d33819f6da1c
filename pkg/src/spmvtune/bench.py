"""Timing harness, dataset labeling, and solver comparison.

Every configuration is timed on every matrix (conversion excluded from the
measured region, result buffer pre-allocated once); the per-stage argmin
labels drive five training CSVs. Timing caches are one JSON file per matrix
so interrupted dataset builds resume where they stopped.
"""
from __future__ import annotations

import json
import logging
import socket
import time
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np

from .errors import FormatInapplicableError, SpmvTuneError
from .features import FEATURE_NAMES, FeatureVector, extract_features
from .formats import AnyMatrix, FormatTag, convert, format_of
from .inference import CascadeModelSet
from .kernels import (LANE_WIDTHS, Library, SpmvConfig, default_workers,
                      enumerate_configs, execute_spmv)
from .mmio import load_matrix_market
from .solver import (GmresParams, SolveReport, async_solve, gmres_solve,
                     sequential_predict_solve)

log = logging.getLogger(__name__)

DEFAULT_RUNS = 200
DEFAULT_WARMUPS = 10

FORMAT_ORDER = (FormatTag.COO, FormatTag.CSR, FormatTag.ELL, FormatTag.DIA,
                FormatTag.HYB)
COO_LIBS = (Library.LIB_A, Library.LIB_B)
CSR_LIBS = (Library.LIB_A, Library.LIB_B, Library.LIB_C)
ELL_LIBS = (Library.LIB_A, Library.LIB_C)


@dataclass
class TimingRecord:
    """Mean SpMV seconds per configuration token; None marks inapplicable."""

    matrix_id: str
    times: dict[str, float | None]
    runs: int
    warmups: int
    workers: int
    host: str = field(default_factory=socket.gethostname)

    def to_dict(self) -> dict:
        return {"matrix_id": self.matrix_id, "times": self.times,
                "runs": self.runs, "warmups": self.warmups,
                "workers": self.workers, "host": self.host}

    @classmethod
    def from_dict(cls, doc: dict) -> "TimingRecord":
        return cls(matrix_id=doc["matrix_id"], times=dict(doc["times"]),
                   runs=int(doc["runs"]), warmups=int(doc["warmups"]),
                   workers=int(doc["workers"]), host=doc.get("host", ""))


@dataclass
class StageLabels:
    """Per-stage argmin labels derived from one matrix's timing table."""

    format: str
    coo_lib: str | None
    csr_lib: str | None
    ell_lib: str | None
    tpv: str | None


def _timing_vector(m: AnyMatrix) -> np.ndarray:
    # Fixed input so repeated timings of one matrix measure the same product.
    return np.random.default_rng(0).uniform(0.5, 1.5, size=m.ncols)


def time_config(m: AnyMatrix, cfg: SpmvConfig, runs: int = DEFAULT_RUNS,
                warmups: int = DEFAULT_WARMUPS, *, workers: int | None = None,
                clock=time.perf_counter) -> float | None:
    """Mean seconds of one SpMV under ``cfg``, or None when inapplicable.

    The representation is converted before the clock starts and the result
    buffer is allocated once, so the measured region contains kernel
    executions only.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if workers is None:
        workers = default_workers()
    try:
        rep = m if format_of(m) is cfg.format else convert(m, cfg.format)
    except FormatInapplicableError:
        return None
    x = _timing_vector(m)
    out = np.zeros(m.nrows, dtype=np.float64)
    for _ in range(warmups):
        execute_spmv(cfg, rep, x, workers=workers, out=out)
    t0 = clock()
    for _ in range(runs):
        execute_spmv(cfg, rep, x, workers=workers, out=out)
    elapsed = clock() - t0
    return elapsed / runs


def time_all_configs(m: AnyMatrix, matrix_id: str, runs: int = DEFAULT_RUNS,
                     warmups: int = DEFAULT_WARMUPS, *,
                     workers: int | None = None) -> TimingRecord:
    """Time the full configuration space, serially, on one matrix."""
    if workers is None:
        workers = default_workers()
    times: dict[str, float | None] = {}
    # Convert each format once up front; kernels then share the same rep.
    reps: dict[FormatTag, AnyMatrix | None] = {}
    for cfg in enumerate_configs():
        if cfg.format not in reps:
            try:
                reps[cfg.format] = (m if format_of(m) is cfg.format
                                    else convert(m, cfg.format))
            except FormatInapplicableError:
                reps[cfg.format] = None
        rep = reps[cfg.format]
        if rep is None:
            times[cfg.token()] = None
            continue
        times[cfg.token()] = time_config(rep, cfg, runs, warmups,
                                         workers=workers)
    return TimingRecord(matrix_id=matrix_id, times=times, runs=runs,
                        warmups=warmups, workers=workers)


def _argmin_label(candidates: list[tuple[str, float | None]]) -> str | None:
    """First label with the smallest time; None when nothing is applicable."""
    best_label, best_time = None, None
    for label, t in candidates:
        if t is None:
            continue
        if best_time is None or t < best_time:
            best_label, best_time = label, t
    return best_label


def _lane_token(w: int) -> str:
    return SpmvConfig(FormatTag.CSR, Library.LIB_A, w).token()


def _csr_liba_time(times: dict[str, float | None]) -> float | None:
    # The lane-vectorized kernel's representative time is its best lane,
    # consistent with the lane stage being free to pick that lane later.
    lanes = [times.get(_lane_token(w)) for w in LANE_WIDTHS]
    usable = [t for t in lanes if t is not None]
    return min(usable) if usable else None


def label_from_times(times: dict[str, float | None]) -> StageLabels:
    """Derive the per-stage labels from one timing table.

    The format stage compares the all-format suite's time per format; each
    per-format stage compares the suites implementing that format; the lane
    stage compares lane widths. Exact ties resolve to the lower config index
    (candidate order below).
    """
    def t(fmt: FormatTag, lib: Library, lane: int | None = None):
        return times.get(SpmvConfig(fmt, lib, lane).token())

    fmt_candidates = []
    for fmt in FORMAT_ORDER:
        if fmt is FormatTag.CSR:
            fmt_candidates.append((fmt.value, _csr_liba_time(times)))
        else:
            fmt_candidates.append((fmt.value, t(fmt, Library.LIB_A)))
    fmt_label = _argmin_label(fmt_candidates)
    if fmt_label is None:
        raise SpmvTuneError("no applicable configuration to label")

    coo_lib = _argmin_label([(lib.value, t(FormatTag.COO, lib))
                             for lib in COO_LIBS])
    csr_lib = _argmin_label(
        [(Library.LIB_A.value, _csr_liba_time(times))] +
        [(lib.value, t(FormatTag.CSR, lib)) for lib in CSR_LIBS[1:]])
    ell_lib = _argmin_label([(lib.value, t(FormatTag.ELL, lib))
                             for lib in ELL_LIBS])
    tpv = _argmin_label([(str(w), t(FormatTag.CSR, Library.LIB_A, w))
                         for w in LANE_WIDTHS])
    return StageLabels(format=fmt_label, coo_lib=coo_lib, csr_lib=csr_lib,
                       ell_lib=ell_lib, tpv=tpv)


DATASET_FILES = {
    "FORMAT": "FORMAT.csv",
    "COO-LIB": "COO-LIB.csv",
    "CSR-LIB": "CSR-LIB.csv",
    "ELL-LIB": "ELL-LIB.csv",
    "CSR-TPV": "CSR-TPV.csv",
}


def route_labels(labels: StageLabels) -> dict[str, str]:
    """Which datasets this matrix's row lands in, with the label for each.

    Every matrix contributes a FORMAT row. The row then flows only into the
    stage datasets its format label routes to; the lane dataset receives it
    only when the format stage chose CSR and the library stage chose the
    lane-vectorized suite.
    """
    rows = {"FORMAT": labels.format}
    if labels.format == FormatTag.COO.value and labels.coo_lib:
        rows["COO-LIB"] = labels.coo_lib
    elif labels.format == FormatTag.CSR.value and labels.csr_lib:
        rows["CSR-LIB"] = labels.csr_lib
        if labels.csr_lib == Library.LIB_A.value and labels.tpv:
            rows["CSR-TPV"] = labels.tpv
    elif labels.format == FormatTag.ELL.value and labels.ell_lib:
        rows["ELL-LIB"] = labels.ell_lib
    return rows


def _fingerprint_lines(runs: int, warmups: int, workers: int) -> list[str]:
    return [f"# host={socket.gethostname()} workers={workers} "
            f"runs={runs} warmups={warmups}"]


def _write_csv(path: Path, rows: list[tuple[FeatureVector, str]],
               fingerprint: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in fingerprint:
            fh.write(line + "\n")
        fh.write(",".join(FEATURE_NAMES) + ",label\n")
        for fv, label in rows:
            cells = [repr(float(v)) for v in fv.to_array()]
            fh.write(",".join(cells) + f",{label}\n")


def build_dataset(matrix_dir: str | PathLike, output_dir: str | PathLike,
                  runs: int = DEFAULT_RUNS, warmups: int = DEFAULT_WARMUPS, *,
                  workers: int | None = None, timer=None) -> dict[str, int]:
    """Time every ``.mtx`` under ``matrix_dir`` and emit the five labeled CSVs.

    Unreadable or unsupported matrices are logged and skipped. Timing tables
    are cached per matrix under ``output_dir``/cache for resumable builds.
    Returns the row count per dataset. ``timer`` may replace the timing stage
    in tests (signature: (matrix, matrix_id) -> TimingRecord).
    """
    matrix_dir = Path(matrix_dir)
    output_dir = Path(output_dir)
    if workers is None:
        workers = default_workers()
    paths = sorted(matrix_dir.glob("*.mtx"))
    if not paths:
        raise SpmvTuneError(f"no .mtx files found in {matrix_dir}")
    output_dir.mkdir(parents=True, exist_ok=True)
    cache_dir = output_dir / "cache"
    cache_dir.mkdir(exist_ok=True)

    datasets: dict[str, list[tuple[FeatureVector, str]]] = \
        {name: [] for name in DATASET_FILES}
    for path in paths:
        matrix_id = path.stem
        try:
            coo = load_matrix_market(path)
            if coo.nnz == 0:
                raise SpmvTuneError("matrix has no entries")
            fv = extract_features(convert(coo, FormatTag.CSR))
            cache_path = cache_dir / f"{matrix_id}.json"
            record = None
            if cache_path.exists():
                cached = TimingRecord.from_dict(
                    json.loads(cache_path.read_text()))
                if cached.runs == runs and cached.warmups == warmups and \
                        cached.workers == workers:
                    record = cached
            if record is None:
                if timer is not None:
                    record = timer(coo, matrix_id)
                else:
                    record = time_all_configs(coo, matrix_id, runs, warmups,
                                              workers=workers)
                cache_path.write_text(json.dumps(record.to_dict(), indent=1))
            labels = label_from_times(record.times)
        except (SpmvTuneError, OSError) as exc:
            log.warning("skipping %s: %s", path.name, exc)
            continue
        for name, label in route_labels(labels).items():
            datasets[name].append((fv, label))

    fingerprint = _fingerprint_lines(runs, warmups, workers)
    for name, filename in DATASET_FILES.items():
        _write_csv(output_dir / filename, datasets[name], fingerprint)
    return {name: len(rows) for name, rows in datasets.items()}


@dataclass
class SolverComparison:
    """Wall times and timelines of the three solve strategies on one system."""

    matrix_id: str
    default: SolveReport
    sequential: SolveReport
    async_: SolveReport

    @property
    def speedup_sequential(self) -> float:
        return self.default.wall_seconds / self.sequential.wall_seconds

    @property
    def speedup_async(self) -> float:
        return self.default.wall_seconds / self.async_.wall_seconds

    def to_dict(self) -> dict:
        return {"matrix_id": self.matrix_id,
                "default": self.default.to_dict(),
                "sequential": self.sequential.to_dict(),
                "async": self.async_.to_dict(),
                "speedup_sequential": self.speedup_sequential,
                "speedup_async": self.speedup_async}


def compare_solvers(m: AnyMatrix, params: GmresParams,
                    models: CascadeModelSet, *, matrix_id: str = "matrix",
                    workers: int | None = None) -> SolverComparison:
    """Run the default-config, predict-then-solve, and overlapped solves."""
    b = None  # each solve derives the same RHS from params
    default = gmres_solve(m, b, params, workers=workers)
    sequential = sequential_predict_solve(m, b, params, models, workers=workers)
    async_report = async_solve(m, b, params, models, workers=workers)
    for rep in (default, sequential, async_report):
        rep.matrix_id = matrix_id
    return SolverComparison(matrix_id=matrix_id, default=default,
                            sequential=sequential, async_=async_report)
