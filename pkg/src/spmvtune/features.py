"""Structural feature extraction from compressed-row matrices.

The fifteen features summarize the nonzero distribution: global counts and
density, per-row population statistics, row span and clustering averages, and
diagonal occupancy. Extraction streams the index arrays exactly once, in
row chunks, checking a cancellation flag between chunks so a concurrent
advisor can be stopped mid-flight.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .formats import CsrMatrix

# Canonical column order for model inputs and dataset CSVs.
FEATURE_NAMES = ("nrows", "ncols", "nnz", "density", "mean", "sd", "cov",
                 "max", "min", "maxavg", "distavg", "clusteravg", "fill",
                 "ndiag", "diagfill")

CANCEL_CHECK_ROWS = 4096


@dataclass
class FeatureVector:
    nrows: int
    ncols: int
    nnz: int
    density: float
    mean: float
    sd: float
    cov: float
    max: float
    min: float
    maxavg: float
    distavg: float
    clusteravg: float
    fill: float
    ndiag: float
    diagfill: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_NAMES],
                        dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "FeatureVector":
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features, "
                             f"got shape {a.shape}")
        vals = dict(zip(FEATURE_NAMES, a))
        for n in ("nrows", "ncols", "nnz"):
            vals[n] = int(vals[n])
        return cls(**vals)


@dataclass
class TraversalCounter:
    """Counts array elements consumed, for complexity-discipline assertions."""

    row_ptr_reads: int = 0
    col_idx_reads: int = 0


def extract_features(m: CsrMatrix, cancel: threading.Event | None = None, *,
                     counter: TraversalCounter | None = None,
                     row_chunk: int = CANCEL_CHECK_ROWS) -> FeatureVector | None:
    """Compute the feature vector, or return None if ``cancel`` is set.

    The cancellation flag is consulted before any work and then at least once
    every ``row_chunk`` rows, so a raised flag stops the extraction promptly
    and, when raised up front, before ``col_idx`` is touched. Features are
    produced cheapest-first (counts, then row statistics, then the per-entry
    scans) so a cancellation wastes as little work as possible.
    """
    if cancel is not None and cancel.is_set():
        return None
    nrows, ncols = m.nrows, m.ncols
    nnz = m.nnz

    # Row-population statistics from one pass over row_ptr.
    sum_r = 0
    sum_r2 = 0
    max_r = 0
    min_r = None
    for start in range(0, nrows, row_chunk):
        if cancel is not None and cancel.is_set():
            return None
        stop = min(start + row_chunk, nrows)
        lens = np.diff(m.row_ptr[start:stop + 1])
        if counter is not None:
            counter.row_ptr_reads += stop - start + 1
        sum_r += int(lens.sum())
        sum_r2 += int(np.square(lens).sum())
        max_r = max(max_r, int(lens.max()))
        low = int(lens.min())
        min_r = low if min_r is None else min(min_r, low)
    min_r = min_r or 0

    density = nnz / (nrows * ncols)
    mean = nnz / nrows
    # Counts are exact in float64, so the moment form loses nothing; clamp
    # guards the uniform-rows case where rounding could dip below zero.
    sd = float(np.sqrt(max(sum_r2 / nrows - mean * mean, 0.0)))
    cov = sd / mean if mean > 0 else 0.0
    maxavg = max_r - mean
    fill = nrows * max_r / nnz if nnz > 0 else 0.0

    # Per-entry scan: row spans, longest consecutive-column runs, diagonals.
    if cancel is not None and cancel.is_set():
        return None
    span_sum = 0
    run_sum = 0
    diag_seen = np.zeros(nrows + ncols - 1, dtype=bool)
    for start in range(0, nrows, row_chunk):
        if cancel is not None and cancel.is_set():
            return None
        stop = min(start + row_chunk, nrows)
        ptr = m.row_ptr[start:stop + 1]
        e0, e1 = int(ptr[0]), int(ptr[-1])
        if e0 == e1:
            continue
        cols = m.col_idx[e0:e1]
        if counter is not None:
            counter.col_idx_reads += e1 - e0
        lens = np.diff(ptr)
        nonempty = lens > 0
        first = cols[ptr[:-1][nonempty] - e0]
        last = cols[ptr[1:][nonempty] - e0 - 1]
        span_sum += int((last - first).sum())

        entry_rows = np.repeat(np.arange(start, stop, dtype=np.int64), lens)
        contiguous = np.zeros(e1 - e0, dtype=bool)
        if e1 - e0 > 1:
            contiguous[1:] = (np.diff(cols) == 1) & (np.diff(entry_rows) == 0)
        run_starts = np.flatnonzero(~contiguous)
        run_lens = np.diff(np.append(run_starts, e1 - e0))
        row_best = np.zeros(stop - start, dtype=np.int64)
        np.maximum.at(row_best, entry_rows[run_starts] - start, run_lens)
        run_sum += int(row_best.sum())

        diag_seen[cols - entry_rows + (nrows - 1)] = True

    distavg = span_sum / nrows
    clusteravg = run_sum / nrows
    ndiag = int(np.count_nonzero(diag_seen))
    diagfill = nrows * ndiag / nnz if nnz > 0 else 0.0

    return FeatureVector(nrows=nrows, ncols=ncols, nnz=nnz, density=density,
                         mean=mean, sd=sd, cov=cov, max=float(max_r),
                         min=float(min_r), maxavg=maxavg, distavg=distavg,
                         clusteravg=clusteravg, fill=fill, ndiag=float(ndiag),
                         diagfill=diagfill)
