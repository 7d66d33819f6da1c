"""Matrix Market coordinate-format ingestion.

Supports real/integer/pattern fields with general or symmetric structure.
Indices are 1-based on disk and 0-based in memory; symmetric inputs are
expanded to full storage and duplicate coordinates are merged by summation.
"""
from __future__ import annotations

import io
from os import PathLike
from typing import Iterable, Iterator

import numpy as np

from .errors import MatrixMarketError
from .formats import CooMatrix

_FIELDS = {"real", "integer", "pattern"}
_SYMMETRIES = {"general", "symmetric"}


def _line_iter(source) -> Iterator[str]:
    if isinstance(source, str):
        return iter(io.StringIO(source))
    if hasattr(source, "read"):
        return iter(source)
    if isinstance(source, Iterable):
        return iter(source)
    raise TypeError("source must be text, a text stream, or lines")


def parse_matrix_market(source) -> CooMatrix:
    """Parse Matrix Market coordinate text into a CooMatrix.

    Parameters
    ----------
    source : str | text stream | iterable of lines
        The file content. Use :func:`load_matrix_market` for paths.

    Raises
    ------
    MatrixMarketError
        On a malformed banner or size line, a complex field, an unsupported
        symmetry, out-of-range indices, or a truncated entry list.
    """
    lines = _line_iter(source)
    try:
        banner = next(lines)
    except StopIteration:
        raise MatrixMarketError("empty input: missing banner") from None
    parts = banner.strip().split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
        raise MatrixMarketError(f"malformed banner: {banner.strip()!r}")
    obj, fmt, field, symmetry = (p.lower() for p in parts[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}")
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format {fmt!r} (coordinate only)")
    if field == "complex":
        raise MatrixMarketError("complex matrices are not supported")
    if field not in _FIELDS:
        raise MatrixMarketError(f"unsupported field {field!r}")
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}")

    size = None
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        size = stripped
        break
    if size is None:
        raise MatrixMarketError("missing size line")
    toks = size.split()
    if len(toks) != 3:
        raise MatrixMarketError(f"malformed size line: {size!r}")
    try:
        nrows, ncols, nnz = (int(t) for t in toks)
    except ValueError:
        raise MatrixMarketError(f"malformed size line: {size!r}") from None
    if nrows < 1 or ncols < 1 or nnz < 0:
        raise MatrixMarketError(f"invalid dimensions in size line: {size!r}")

    pattern = field == "pattern"
    want = 2 if pattern else 3
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    seen = 0
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        if seen >= nnz:
            raise MatrixMarketError("more entries than declared in size line")
        toks = stripped.split()
        if len(toks) != want:
            raise MatrixMarketError(
                f"entry {seen + 1}: expected {want} fields, got {len(toks)}")
        try:
            r = int(toks[0])
            c = int(toks[1])
            v = 1.0 if pattern else float(toks[2])
        except ValueError:
            raise MatrixMarketError(f"entry {seen + 1}: malformed fields "
                                    f"{stripped!r}") from None
        if not (1 <= r <= nrows and 1 <= c <= ncols):
            raise MatrixMarketError(
                f"entry {seen + 1}: index ({r}, {c}) out of range for "
                f"{nrows}x{ncols}")
        rows[seen] = r - 1
        cols[seen] = c - 1
        vals[seen] = v
        seen += 1
    if seen != nnz:
        raise MatrixMarketError(f"truncated entries: got {seen}, expected {nnz}")

    if symmetry == "symmetric":
        off = rows != cols
        mirrored_rows, mirrored_cols, mirrored_vals = cols[off], rows[off], vals[off]
        rows = np.concatenate([rows, mirrored_rows])
        cols = np.concatenate([cols, mirrored_cols])
        vals = np.concatenate([vals, mirrored_vals])
    return CooMatrix.from_triplets(nrows, ncols, rows, cols, vals,
                                   sum_duplicates=True)


def load_matrix_market(path: str | PathLike) -> CooMatrix:
    """Read a ``.mtx`` file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix_market(fh)
