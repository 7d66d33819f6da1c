"""Shared test utilities: matrix generators, brute-force oracles, stub models."""
from __future__ import annotations

import numpy as np

from spmvtune import (FEATURE_NAMES, CooMatrix, TreeEnsembleModel,
                      model_from_dict)


def random_coo(rng: np.random.Generator, max_n: int = 300,
               max_density: float = 0.3, square: bool = False,
               min_n: int = 1) -> CooMatrix:
    """Random sparse matrix with positive values (no accidental zeros)."""
    nrows = int(rng.integers(min_n, max_n + 1))
    ncols = nrows if square else int(rng.integers(min_n, max_n + 1))
    density = rng.uniform(0.0, max_density)
    nnz = int(round(density * nrows * ncols))
    nnz = min(nnz, nrows * ncols)
    flat = rng.choice(nrows * ncols, size=nnz, replace=False)
    rows, cols = np.divmod(flat, ncols)
    values = rng.uniform(0.5, 1.5, size=nnz)
    return CooMatrix.from_triplets(nrows, ncols, rows, cols, values)


def coo_from_dense(dense) -> CooMatrix:
    dense = np.asarray(dense, dtype=np.float64)
    rows, cols = np.nonzero(dense)
    return CooMatrix.from_triplets(dense.shape[0], dense.shape[1],
                                   rows, cols, dense[rows, cols])


def dense_from_coo(m: CooMatrix) -> np.ndarray:
    dense = np.zeros((m.nrows, m.ncols))
    dense[m.rows, m.cols] = m.values
    return dense


def entry_set(m: CooMatrix) -> set[tuple[int, int, float]]:
    return set(zip(m.rows.tolist(), m.cols.tolist(), m.values.tolist()))


def poisson2d(nx: int) -> CooMatrix:
    """5-point stencil for the Laplacian on an nx-by-nx interior grid."""
    n = nx * nx
    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for gy in range(nx):
        for gx in range(nx):
            i = gy * nx + gx
            add(i, i, 4.0)
            if gx > 0:
                add(i, i - 1, -1.0)
            if gx < nx - 1:
                add(i, i + 1, -1.0)
            if gy > 0:
                add(i, i - nx, -1.0)
            if gy < nx - 1:
                add(i, i + nx, -1.0)
    return CooMatrix.from_triplets(n, n, rows, cols, vals)


def banded(n: int, offsets: list[int], rng: np.random.Generator | None = None,
           diagonal_boost: float = 0.0) -> CooMatrix:
    """Matrix populated on the given diagonals with positive values."""
    rng = rng or np.random.default_rng(0)
    rows_l, cols_l, vals_l = [], [], []
    idx = np.arange(n)
    for off in offsets:
        cols = idx + off
        keep = (cols >= 0) & (cols < n)
        rows_l.append(idx[keep])
        cols_l.append(cols[keep])
        v = rng.uniform(0.5, 1.5, size=int(keep.sum()))
        if off == 0:
            v += diagonal_boost
        vals_l.append(v)
    return CooMatrix.from_triplets(
        n, n, np.concatenate(rows_l), np.concatenate(cols_l),
        np.concatenate(vals_l))


def brute_force_features(m: CooMatrix) -> dict[str, float]:
    """Independent per-entry evaluation of all fifteen features.

    Walks the plain coordinate list with Python loops; shares no code with
    the streaming extractor.
    """
    nrows, ncols, nnz = m.nrows, m.ncols, m.nnz
    per_row_cols: dict[int, list[int]] = {}
    for r, c in zip(m.rows.tolist(), m.cols.tolist()):
        per_row_cols.setdefault(r, []).append(c)
    row_counts = [len(per_row_cols.get(i, [])) for i in range(nrows)]

    mean = sum(row_counts) / nrows
    sd = (sum((mean - r) ** 2 for r in row_counts) / nrows) ** 0.5
    mx, mn = max(row_counts), min(row_counts)

    span_total = 0
    run_total = 0
    diagonals = set()
    for i in range(nrows):
        cols = sorted(per_row_cols.get(i, []))
        if not cols:
            continue
        span_total += abs(cols[0] - cols[-1])
        best = run = 1
        for a, b in zip(cols, cols[1:]):
            run = run + 1 if b == a + 1 else 1
            best = max(best, run)
        run_total += best
        for c in cols:
            diagonals.add(c - i)
    ndiag = len(diagonals)

    return {
        "nrows": nrows, "ncols": ncols, "nnz": nnz,
        "density": nnz / (nrows * ncols),
        "mean": mean, "sd": sd,
        "cov": sd / mean if mean > 0 else 0.0,
        "max": float(mx), "min": float(mn),
        "maxavg": mx - mean,
        "distavg": span_total / nrows,
        "clusteravg": run_total / nrows,
        "fill": nrows * mx / nnz if nnz else 0.0,
        "ndiag": float(ndiag),
        "diagfill": nrows * ndiag / nnz if nnz else 0.0,
    }


def leaf(score: float) -> dict:
    return {"score": float(score)}


def split(feature: str | int, threshold: float, left: dict, right: dict) -> dict:
    idx = FEATURE_NAMES.index(feature) if isinstance(feature, str) else feature
    return {"feature_index": idx, "threshold": float(threshold),
            "left": left, "right": right}


def model_dict(classes: list[str], trees: list[list[dict]]) -> dict:
    return {"schema_version": 1, "feature_names": list(FEATURE_NAMES),
            "classes": classes, "trees": trees}


def stub_model(classes: list[str], forced: str) -> TreeEnsembleModel:
    """Model that predicts ``forced`` for every input."""
    trees = [[leaf(1.0 if c == forced else 0.0)] for c in classes]
    return model_from_dict(model_dict(classes, trees), source="<stub>")


def random_model(rng: np.random.Generator, classes: list[str],
                 n_trees: int = 8, depth: int = 4) -> TreeEnsembleModel:
    """Random but well-formed ensemble for property tests."""
    ranges = {"nrows": (1, 300), "ncols": (1, 300), "nnz": (0, 27000),
              "density": (0, 1), "mean": (0, 90), "sd": (0, 40),
              "cov": (0, 5), "max": (0, 300), "min": (0, 300),
              "maxavg": (0, 300), "distavg": (0, 300),
              "clusteravg": (0, 300), "fill": (0, 50), "ndiag": (0, 600),
              "diagfill": (0, 50)}

    def node(level: int) -> dict:
        if level == 0 or rng.random() < 0.3:
            return leaf(rng.normal())
        fi = int(rng.integers(0, len(FEATURE_NAMES)))
        lo, hi = ranges[FEATURE_NAMES[fi]]
        return {"feature_index": fi,
                "threshold": float(rng.uniform(lo, hi)),
                "left": node(level - 1), "right": node(level - 1)}

    trees = [[node(depth) for _ in range(n_trees)] for _ in classes]
    return model_from_dict(model_dict(classes, trees), source="<random>")


def random_feature_array(rng: np.random.Generator) -> np.ndarray:
    nrows = int(rng.integers(1, 300))
    ncols = int(rng.integers(1, 300))
    nnz = int(rng.integers(0, nrows * ncols + 1))
    mean = nnz / nrows
    mx = float(rng.integers(0, ncols + 1))
    sd = float(rng.uniform(0, mx + 1))
    ndiag = float(rng.integers(0, nrows + ncols))
    return np.array([
        nrows, ncols, nnz, nnz / (nrows * ncols), mean, sd,
        sd / mean if mean else 0.0, mx, float(rng.integers(0, mx + 1)),
        mx - mean, float(rng.uniform(0, ncols)), float(rng.uniform(0, ncols)),
        nrows * mx / nnz if nnz else 0.0, ndiag,
        nrows * ndiag / nnz if nnz else 0.0])
