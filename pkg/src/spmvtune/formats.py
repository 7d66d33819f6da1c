"""Sparse matrix containers for the five storage layouts and their conversions.

Coordinate form is the conversion hub: every layout converts to COO and is
built from COO. All containers are immutable after construction (backing
arrays are marked read-only), so they can be shared freely across threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import FormatInapplicableError

# DIA refuses matrices with more populated diagonals than this; callers must
# treat the format as inapplicable rather than fall over on a huge allocation.
DIA_OFFSET_CAP = 4096


class FormatTag(str, Enum):
    COO = "COO"
    CSR = "CSR"
    ELL = "ELL"
    DIA = "DIA"
    HYB = "HYB"


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _as_index_array(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def _as_value_array(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass
class CooMatrix:
    """Coordinate triplets sorted row-major with no duplicate coordinates."""

    nrows: int
    ncols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1:
            raise ValueError("matrix dimensions must be positive")
        self.rows = _as_index_array(self.rows, "rows")
        self.cols = _as_index_array(self.cols, "cols")
        self.values = _as_value_array(self.values, "values")
        if not (len(self.rows) == len(self.cols) == len(self.values)):
            raise ValueError("rows, cols, values must have equal length")
        if self.rows.size:
            if self.rows.min() < 0 or self.rows.max() >= self.nrows:
                raise ValueError("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= self.ncols:
                raise ValueError("column index out of range")
            dr = np.diff(self.rows)
            if np.any(dr < 0):
                raise ValueError("entries not sorted by row")
            same_row = dr == 0
            if np.any(np.diff(self.cols)[same_row] <= 0):
                raise ValueError("entries not strictly sorted by column within rows")
        for a in (self.rows, self.cols, self.values):
            _freeze(a)

    @property
    def nnz(self) -> int:
        return len(self.values)

    @classmethod
    def from_triplets(cls, nrows, ncols, rows, cols, values, *, sum_duplicates=False):
        """Build from unsorted triplets; optionally merge duplicates by summation."""
        rows = _as_index_array(rows, "rows")
        cols = _as_index_array(cols, "cols")
        values = _as_value_array(values, "values")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if sum_duplicates and rows.size:
            boundary = np.concatenate(
                ([True], (np.diff(rows) != 0) | (np.diff(cols) != 0)))
            starts = np.flatnonzero(boundary)
            values = np.add.reduceat(values, starts)
            rows, cols = rows[starts], cols[starts]
        return cls(nrows, ncols, rows, cols, values)


@dataclass
class CsrMatrix:
    """Compressed sparse rows; columns strictly increasing within each row."""

    nrows: int
    ncols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1:
            raise ValueError("matrix dimensions must be positive")
        self.row_ptr = _as_index_array(self.row_ptr, "row_ptr")
        self.col_idx = _as_index_array(self.col_idx, "col_idx")
        self.values = _as_value_array(self.values, "values")
        if len(self.row_ptr) != self.nrows + 1:
            raise ValueError("row_ptr must have nrows+1 entries")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != len(self.values):
            raise ValueError("row_ptr endpoints must be 0 and nnz")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if len(self.col_idx) != len(self.values):
            raise ValueError("col_idx and values must have equal length")
        if self.col_idx.size:
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.ncols:
                raise ValueError("column index out of range")
            interior = np.ones(len(self.col_idx) - 1, dtype=bool)
            boundaries = self.row_ptr[1:-1]
            boundaries = boundaries[(boundaries > 0)
                                    & (boundaries < len(self.col_idx))]
            interior[boundaries - 1] = False  # row boundaries
            if np.any(np.diff(self.col_idx)[interior] <= 0):
                raise ValueError("columns not strictly increasing within a row")
        for a in (self.row_ptr, self.col_idx, self.values):
            _freeze(a)

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def row_lengths(self) -> np.ndarray:
        return np.diff(self.row_ptr)


@dataclass
class EllMatrix:
    """Fixed-width padded rows, column-major storage.

    Padding cells carry the sentinel column index ``ncols`` and value 0, so
    kernels may either skip them or let them contribute an exact zero.
    """

    nrows: int
    ncols: int
    width: int
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1:
            raise ValueError("matrix dimensions must be positive")
        if self.width < 0:
            raise ValueError("width must be non-negative")
        self.col_idx = np.asfortranarray(self.col_idx, dtype=np.int64)
        self.values = np.asfortranarray(self.values, dtype=np.float64)
        shape = (self.nrows, self.width)
        if self.col_idx.shape != shape or self.values.shape != shape:
            raise ValueError("col_idx and values must be nrows x width")
        if self.width:
            if self.col_idx.min() < 0 or self.col_idx.max() > self.ncols:
                raise ValueError("column index out of range")
            pad = self.col_idx == self.ncols
            if np.any(self.values[pad] != 0.0):
                raise ValueError("padding cells must hold value 0")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("values contain non-finite entries")
        for a in (self.col_idx, self.values):
            _freeze(a)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.col_idx != self.ncols)) if self.width else 0


@dataclass
class DiaMatrix:
    """Stored diagonals; ``data[k, i]`` holds the entry at (i, i + offsets[k]).

    Cells whose column falls outside the matrix are zero padding. Entries
    whose stored value is exactly 0 are indistinguishable from padding and are
    dropped on conversion back to coordinates.
    """

    nrows: int
    ncols: int
    offsets: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1:
            raise ValueError("matrix dimensions must be positive")
        self.offsets = _as_index_array(self.offsets, "offsets")
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.shape != (len(self.offsets), self.nrows):
            raise ValueError("data must be len(offsets) x nrows")
        if self.offsets.size:
            if np.any(np.diff(self.offsets) <= 0):
                raise ValueError("offsets must be strictly increasing")
            if self.offsets.min() <= -self.nrows or self.offsets.max() >= self.ncols:
                raise ValueError("offset out of range")
            if not np.all(np.isfinite(self.data)):
                raise ValueError("data contains non-finite entries")
            rows = np.arange(self.nrows)
            for k, off in enumerate(self.offsets):
                outside = (rows + off < 0) | (rows + off >= self.ncols)
                if np.any(self.data[k, outside] != 0.0):
                    raise ValueError("padding outside the matrix must be 0")
        _freeze(self.offsets)
        _freeze(self.data)

    @property
    def ndiag(self) -> int:
        return len(self.offsets)


@dataclass
class HybMatrix:
    """ELL part holding up to ``split_width`` leading entries per row, COO rest."""

    ell_part: EllMatrix
    coo_part: CooMatrix
    split_width: int

    def __post_init__(self):
        if self.ell_part.nrows != self.coo_part.nrows or \
                self.ell_part.ncols != self.coo_part.ncols:
            raise ValueError("ELL and COO parts must share dimensions")
        if self.ell_part.width != self.split_width:
            raise ValueError("ELL part width must equal split_width")
        ell_coo = _ell_to_coo(self.ell_part)
        flat_ell = ell_coo.rows * self.ncols + ell_coo.cols
        flat_coo = self.coo_part.rows * self.ncols + self.coo_part.cols
        if np.intersect1d(flat_ell, flat_coo).size:
            raise ValueError("a coordinate appears in both HYB parts")

    @property
    def nrows(self) -> int:
        return self.ell_part.nrows

    @property
    def ncols(self) -> int:
        return self.ell_part.ncols

    @property
    def nnz(self) -> int:
        return self.ell_part.nnz + self.coo_part.nnz


AnyMatrix = CooMatrix | CsrMatrix | EllMatrix | DiaMatrix | HybMatrix

FORMAT_OF_TYPE = {
    CooMatrix: FormatTag.COO,
    CsrMatrix: FormatTag.CSR,
    EllMatrix: FormatTag.ELL,
    DiaMatrix: FormatTag.DIA,
    HybMatrix: FormatTag.HYB,
}


def format_of(m: AnyMatrix) -> FormatTag:
    try:
        return FORMAT_OF_TYPE[type(m)]
    except KeyError:
        raise TypeError(f"not a sparse matrix container: {type(m)!r}") from None


def to_coo(m: AnyMatrix) -> CooMatrix:
    """Convert any layout to coordinate form (a fresh container)."""
    if isinstance(m, CooMatrix):
        return CooMatrix(m.nrows, m.ncols, m.rows, m.cols, m.values)
    if isinstance(m, CsrMatrix):
        rows = np.repeat(np.arange(m.nrows, dtype=np.int64), m.row_lengths)
        return CooMatrix(m.nrows, m.ncols, rows, m.col_idx, m.values)
    if isinstance(m, EllMatrix):
        return _ell_to_coo(m)
    if isinstance(m, DiaMatrix):
        return _dia_to_coo(m)
    if isinstance(m, HybMatrix):
        ell = _ell_to_coo(m.ell_part)
        return CooMatrix.from_triplets(
            m.nrows, m.ncols,
            np.concatenate([ell.rows, m.coo_part.rows]),
            np.concatenate([ell.cols, m.coo_part.cols]),
            np.concatenate([ell.values, m.coo_part.values]))
    raise TypeError(f"not a sparse matrix container: {type(m)!r}")


def convert(m: AnyMatrix, target: FormatTag) -> AnyMatrix:
    """Convert ``m`` to the target layout.

    Raises FormatInapplicableError when the target is DIA and the matrix
    populates more than DIA_OFFSET_CAP diagonals.
    """
    target = FormatTag(target)
    coo = to_coo(m)
    if target is FormatTag.COO:
        return coo
    if target is FormatTag.CSR:
        return _coo_to_csr(coo)
    if target is FormatTag.ELL:
        return _coo_to_ell(coo)
    if target is FormatTag.DIA:
        return _coo_to_dia(coo)
    if target is FormatTag.HYB:
        return _coo_to_hyb(coo)
    raise ValueError(f"unknown format tag {target!r}")


def _row_lengths(coo: CooMatrix) -> np.ndarray:
    return np.bincount(coo.rows, minlength=coo.nrows).astype(np.int64)


def _coo_to_csr(coo: CooMatrix) -> CsrMatrix:
    row_ptr = np.zeros(coo.nrows + 1, dtype=np.int64)
    np.cumsum(_row_lengths(coo), out=row_ptr[1:])
    return CsrMatrix(coo.nrows, coo.ncols, row_ptr, coo.cols, coo.values)


def _positions_in_row(coo: CooMatrix, lens: np.ndarray) -> np.ndarray:
    starts = np.zeros(coo.nrows, dtype=np.int64)
    np.cumsum(lens[:-1], out=starts[1:])
    return np.arange(coo.nnz, dtype=np.int64) - np.repeat(starts, lens)


def _coo_to_ell(coo: CooMatrix) -> EllMatrix:
    lens = _row_lengths(coo)
    width = int(lens.max()) if coo.nnz else 0
    col_idx = np.full((coo.nrows, width), coo.ncols, dtype=np.int64)
    values = np.zeros((coo.nrows, width), dtype=np.float64)
    if coo.nnz:
        pos = _positions_in_row(coo, lens)
        col_idx[coo.rows, pos] = coo.cols
        values[coo.rows, pos] = coo.values
    return EllMatrix(coo.nrows, coo.ncols, width, col_idx, values)


def _coo_to_dia(coo: CooMatrix) -> DiaMatrix:
    offs = np.unique(coo.cols - coo.rows)
    if len(offs) > DIA_OFFSET_CAP:
        raise FormatInapplicableError(
            f"matrix populates {len(offs)} diagonals, above the cap of "
            f"{DIA_OFFSET_CAP}; DIA is inapplicable")
    data = np.zeros((len(offs), coo.nrows), dtype=np.float64)
    if coo.nnz:
        k = np.searchsorted(offs, coo.cols - coo.rows)
        data[k, coo.rows] = coo.values
    return DiaMatrix(coo.nrows, coo.ncols, offs, data)


def hyb_split_width(row_lengths: np.ndarray) -> int:
    """Smallest width that fully covers at least two thirds of the rows."""
    n = len(row_lengths)
    if n == 0:
        return 0
    need = -(-2 * n // 3)  # ceil(2n/3)
    return int(np.sort(row_lengths)[need - 1])


def _coo_to_hyb(coo: CooMatrix) -> HybMatrix:
    lens = _row_lengths(coo)
    w = hyb_split_width(lens)
    if coo.nnz:
        pos = _positions_in_row(coo, lens)
        in_ell = pos < w
    else:
        in_ell = np.zeros(0, dtype=bool)
    col_idx = np.full((coo.nrows, w), coo.ncols, dtype=np.int64)
    values = np.zeros((coo.nrows, w), dtype=np.float64)
    if w and coo.nnz:
        col_idx[coo.rows[in_ell], pos[in_ell]] = coo.cols[in_ell]
        values[coo.rows[in_ell], pos[in_ell]] = coo.values[in_ell]
    ell = EllMatrix(coo.nrows, coo.ncols, w, col_idx, values)
    rest = ~in_ell
    coo_part = CooMatrix(coo.nrows, coo.ncols, coo.rows[rest], coo.cols[rest],
                         coo.values[rest])
    return HybMatrix(ell, coo_part, w)


def _ell_to_coo(ell: EllMatrix) -> CooMatrix:
    stored = ell.col_idx != ell.ncols
    rows, pos = np.nonzero(stored)
    return CooMatrix(ell.nrows, ell.ncols, rows.astype(np.int64),
                     ell.col_idx[rows, pos], ell.values[rows, pos])


def _dia_to_coo(dia: DiaMatrix) -> CooMatrix:
    rows_l, cols_l, vals_l = [], [], []
    idx = np.arange(dia.nrows, dtype=np.int64)
    for k, off in enumerate(dia.offsets):
        cols = idx + off
        keep = (cols >= 0) & (cols < dia.ncols) & (dia.data[k] != 0.0)
        rows_l.append(idx[keep])
        cols_l.append(cols[keep])
        vals_l.append(dia.data[k, keep])
    if rows_l:
        rows = np.concatenate(rows_l)
        cols = np.concatenate(cols_l)
        vals = np.concatenate(vals_l)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=np.float64)
    return CooMatrix.from_triplets(dia.nrows, dia.ncols, rows, cols, vals)


def spmv_reference(m: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """Oracle product y = A x, accumulating each row in ascending column order.

    Deliberately scalar so the summation order is fixed and auditable; every
    kernel variant is checked against this.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.ncols,):
        raise ValueError(f"x must have length {m.ncols}, got {x.shape}")
    y = np.zeros(m.nrows, dtype=np.float64)
    ptr, cols, vals = m.row_ptr, m.col_idx, m.values
    for i in range(m.nrows):
        acc = 0.0
        for k in range(ptr[i], ptr[i + 1]):
            acc += vals[k] * x[cols[k]]
        y[i] = acc
    return y
