"""SpMV kernel variants over the (format, library, lane-width) space.

Three kernel suites stand in for three computing libraries with genuinely
different parallelization strategies, so the fastest configuration really
does depend on matrix structure:

* LibA: segmented reduction over COO, lane-vectorized CSR rows (lane width is
  the tunable strip of per-row partial sums), and canonical ELL/DIA/HYB
  traversals.
* LibB: per-entry scatter-accumulate COO (atomic-add analog, summation order
  nondeterministic) and row-parallel scalar CSR.
* LibC: merge-path entry-balanced CSR and column-strided ELL.

All variants except LibB-COO are bitwise deterministic for a fixed worker
count. Kernels never mutate their inputs and own their output buffer, so they
are safe to run concurrently with feature extraction on the same matrix.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UnsupportedConfigError
from .formats import (AnyMatrix, CooMatrix, CsrMatrix, DiaMatrix, EllMatrix,
                      FormatTag, HybMatrix, format_of)

LANE_WIDTHS = (2, 4, 8, 16, 32)

_WORKERS_ENV = "SPMVTUNE_WORKERS"
_workers_fixed: int | None = None


class Library(str, Enum):
    LIB_A = "LibA"
    LIB_B = "LibB"
    LIB_C = "LibC"


# Which formats each suite implements.
SUPPORT_TABLE = {
    Library.LIB_A: frozenset(FormatTag),
    Library.LIB_B: frozenset({FormatTag.COO, FormatTag.CSR}),
    Library.LIB_C: frozenset({FormatTag.CSR, FormatTag.ELL}),
}


@dataclass(frozen=True)
class SpmvConfig:
    """One point of the configuration space: format, library, optional lane."""

    format: FormatTag
    library: Library
    lane_width: int | None = None

    def __post_init__(self):
        if self.format not in SUPPORT_TABLE[self.library]:
            raise UnsupportedConfigError(
                f"{self.library.value} does not implement {self.format.value}")
        needs_lane = (self.format is FormatTag.CSR
                      and self.library is Library.LIB_A)
        if needs_lane:
            if self.lane_width not in LANE_WIDTHS:
                raise UnsupportedConfigError(
                    f"lane_width must be one of {LANE_WIDTHS} for the "
                    f"lane-vectorized CSR kernel, got {self.lane_width!r}")
        elif self.lane_width is not None:
            raise UnsupportedConfigError(
                "lane_width applies only to the LibA CSR kernel")

    def token(self) -> str:
        """Stable text form, e.g. ``CSR/LibA/8`` or ``COO/LibB``."""
        base = f"{self.format.value}/{self.library.value}"
        return f"{base}/{self.lane_width}" if self.lane_width else base

    @classmethod
    def from_token(cls, token: str) -> "SpmvConfig":
        parts = token.split("/")
        if len(parts) not in (2, 3):
            raise UnsupportedConfigError(f"malformed config token {token!r}")
        fmt = FormatTag(parts[0])
        lib = Library(parts[1])
        lane = int(parts[2]) if len(parts) == 3 else None
        return cls(fmt, lib, lane)


DEFAULT_CONFIG = SpmvConfig(FormatTag.COO, Library.LIB_A)


def enumerate_configs() -> list[SpmvConfig]:
    """All 13 valid configurations in a fixed order.

    LibA first (COO, then CSR with ascending lane widths, ELL, DIA, HYB),
    then LibB (COO, CSR), then LibC (CSR, ELL). The first element is the
    default configuration.
    """
    configs = [DEFAULT_CONFIG]
    configs += [SpmvConfig(FormatTag.CSR, Library.LIB_A, w) for w in LANE_WIDTHS]
    configs += [SpmvConfig(FormatTag.ELL, Library.LIB_A),
                SpmvConfig(FormatTag.DIA, Library.LIB_A),
                SpmvConfig(FormatTag.HYB, Library.LIB_A),
                SpmvConfig(FormatTag.COO, Library.LIB_B),
                SpmvConfig(FormatTag.CSR, Library.LIB_B),
                SpmvConfig(FormatTag.CSR, Library.LIB_C),
                SpmvConfig(FormatTag.ELL, Library.LIB_C)]
    return configs


def default_workers() -> int:
    """Worker count, fixed for the life of the process for timing stability.

    Override with the SPMVTUNE_WORKERS environment variable.
    """
    global _workers_fixed
    if _workers_fixed is None:
        env = os.environ.get(_WORKERS_ENV, "")
        _workers_fixed = int(env) if env else (os.cpu_count() or 1)
        if _workers_fixed < 1:
            raise ValueError(f"{_WORKERS_ENV} must be >= 1")
    return _workers_fixed


def _prepare(m: AnyMatrix, x, out, fmt: FormatTag):
    if format_of(m) is not fmt:
        raise UnsupportedConfigError(
            f"matrix is stored as {format_of(m).value}, kernel expects {fmt.value}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (m.ncols,):
        raise ValueError(f"x must have length {m.ncols}, got {x.shape}")
    if out is None:
        out = np.zeros(m.nrows, dtype=np.float64)
    else:
        if out.shape != (m.nrows,) or out.dtype != np.float64:
            raise ValueError("out must be a float64 vector of length nrows")
        out.fill(0.0)
    return x, out


def _coo_segments(m: CooMatrix):
    starts = np.concatenate(([0], np.flatnonzero(np.diff(m.rows)) + 1))
    return starts, m.rows[starts]


def _coo_segmented_reduce(m: CooMatrix, x, out):
    # LibA-COO: one gather pass, then a segmented reduction over row runs.
    if m.nnz == 0:
        return out
    products = m.values * x[m.cols]
    starts, seg_rows = _coo_segments(m)
    out[seg_rows] = np.add.reduceat(products, starts)
    return out


def _coo_scatter_accumulate(m: CooMatrix, x, out, workers):
    # LibB-COO: entry-order scatter with atomic-add semantics. The visiting
    # order is randomized per call, exactly like contended atomics, so only
    # the 1e-8 equivalence bound holds, not bitwise reproducibility.
    if m.nnz == 0:
        return out
    perm = np.random.default_rng().permutation(m.nnz)
    np.add.at(out, m.rows[perm], m.values[perm] * x[m.cols[perm]])
    return out


def _csr_lane_vectorized(m: CsrMatrix, x, lane: int, out):
    # LibA-CSR: each row accumulates into `lane` strided partial sums which
    # are then combined by a halving tree, mirroring a warp-style reduction.
    if m.nnz == 0:
        return out
    lens = m.row_lengths
    order = np.argsort(-lens, kind="stable")
    lens_desc = lens[order]
    maxlen = int(lens_desc[0])
    lanes = np.zeros((m.nrows, lane), dtype=np.float64)
    starts = m.row_ptr[order]
    neg_lens = -lens_desc
    for j in range(maxlen):
        active = int(np.searchsorted(neg_lens, -j, side="left"))
        idx = starts[:active] + j
        lanes[order[:active], j % lane] += m.values[idx] * x[m.col_idx[idx]]
    width = lane
    while width > 1:
        half = width // 2
        lanes[:, :half] += lanes[:, half:width]
        width = half
    out[:] = lanes[:, 0]
    return out


def _csr_row_scalar(m: CsrMatrix, x, out):
    # LibB-CSR: independent scalar accumulation per row.
    if m.nnz == 0:
        return out
    products = m.values * x[m.col_idx]
    nonempty = m.row_lengths > 0
    out[nonempty] = np.add.reduceat(products, m.row_ptr[:-1][nonempty])
    return out


def _csr_merge_path(m: CsrMatrix, x, out, workers):
    # LibC-CSR: entries are split into equal chunks regardless of row
    # boundaries; rows straddling a chunk edge accumulate partial sums in
    # chunk order. Balanced for skewed rows, grouping depends on `workers`.
    if m.nnz == 0:
        return out
    products = m.values * x[m.col_idx]
    chunks = min(workers, m.nnz)
    bounds = np.linspace(0, m.nnz, chunks + 1, dtype=np.int64)
    ptr = m.row_ptr
    for c in range(chunks):
        e0, e1 = int(bounds[c]), int(bounds[c + 1])
        if e0 == e1:
            continue
        r0 = int(np.searchsorted(ptr, e0, side="right")) - 1
        r1 = int(np.searchsorted(ptr, e1, side="left"))  # rows [r0, r1)
        local_ptr = np.maximum(ptr[r0:r1], e0)
        lens_local = np.diff(np.append(local_ptr, e1))
        nonempty = np.flatnonzero(lens_local > 0)
        sums = np.add.reduceat(products[e0:e1], local_ptr[nonempty] - e0)
        out[r0 + nonempty] += sums
    return out


def _ell_column_sweep(m: EllMatrix, x, out):
    # LibA-ELL: accumulate one stored column at a time, in order.
    if m.width == 0:
        return out
    x_ext = np.concatenate([x, [0.0]])  # sentinel column gathers an exact 0
    for k in range(m.width):
        out += m.values[:, k] * x_ext[m.col_idx[:, k]]
    return out


def _ell_strided(m: EllMatrix, x, out, workers):
    # LibC-ELL: stored columns are dealt round-robin to workers; each stride's
    # partial result is merged in worker order.
    if m.width == 0:
        return out
    x_ext = np.concatenate([x, [0.0]])
    stride = min(workers, m.width)
    for w in range(stride):
        partial = np.zeros(m.nrows, dtype=np.float64)
        for k in range(w, m.width, stride):
            partial += m.values[:, k] * x_ext[m.col_idx[:, k]]
        out += partial
    return out


def _dia_diagonal_sweep(m: DiaMatrix, x, out):
    # LibA-DIA: one strided AXPY per stored diagonal.
    for k in range(m.ndiag):
        off = int(m.offsets[k])
        i0 = max(0, -off)
        i1 = min(m.nrows, m.ncols - off)
        if i0 >= i1:
            continue
        out[i0:i1] += m.data[k, i0:i1] * x[i0 + off:i1 + off]
    return out


def _hyb_split(m: HybMatrix, x, out):
    # LibA-HYB: ELL sweep for the regular part plus a segmented reduction
    # over the spill entries.
    _ell_column_sweep(m.ell_part, x, out)
    if m.coo_part.nnz:
        products = m.coo_part.values * x[m.coo_part.cols]
        starts, seg_rows = _coo_segments(m.coo_part)
        out[seg_rows] += np.add.reduceat(products, starts)
    return out


def execute_spmv(cfg: SpmvConfig, m: AnyMatrix, x, *, workers: int | None = None,
                 out: np.ndarray | None = None) -> np.ndarray:
    """Run one SpMV under the given configuration.

    Parameters
    ----------
    cfg : SpmvConfig
        Must be valid per the support table; ``m`` must already be stored in
        ``cfg.format``.
    x : array
        Input vector of length ``ncols``.
    workers : int, optional
        Partitioning width for the chunked variants; defaults to the
        process-wide value from :func:`default_workers`.
    out : ndarray, optional
        Pre-allocated float64 result buffer (length ``nrows``); when given,
        the kernel writes into it and returns it without allocating a result.
    """
    if workers is None:
        workers = default_workers()
    x, out = _prepare(m, x, out, cfg.format)
    lib = cfg.library
    if cfg.format is FormatTag.COO:
        if lib is Library.LIB_A:
            return _coo_segmented_reduce(m, x, out)
        return _coo_scatter_accumulate(m, x, out, workers)
    if cfg.format is FormatTag.CSR:
        if lib is Library.LIB_A:
            return _csr_lane_vectorized(m, x, cfg.lane_width, out)
        if lib is Library.LIB_B:
            return _csr_row_scalar(m, x, out)
        return _csr_merge_path(m, x, out, workers)
    if cfg.format is FormatTag.ELL:
        if lib is Library.LIB_A:
            return _ell_column_sweep(m, x, out)
        return _ell_strided(m, x, out, workers)
    if cfg.format is FormatTag.DIA:
        return _dia_diagonal_sweep(m, x, out)
    return _hyb_split(m, x, out)
