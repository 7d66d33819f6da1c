"""Separable synthetic datasets for self-tests and fixture export.

Each generator samples plausible feature vectors (dependent features derived
consistently from the sampled counts) and labels them with a crisp rule, so a
competent classifier must reach near-perfect held-out accuracy.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

from .schema import FEATURE_NAMES


def sample_features(rng: np.random.Generator, n: int) -> pd.DataFrame:
    nrows = rng.integers(1, 300, size=n).astype(float)
    ncols = rng.integers(1, 300, size=n).astype(float)
    nnz = np.minimum(np.rint(rng.uniform(0, 0.3, n) * nrows * ncols),
                     nrows * ncols)
    mean = nnz / nrows
    sd = rng.uniform(0, 1, n) * (mean + 1)
    mx = np.minimum(np.ceil(mean + rng.uniform(0, 3, n) * (sd + 1)), ncols)
    mn = np.floor(mean * rng.uniform(0, 1, n))
    ndiag = np.minimum(np.rint(rng.uniform(0, 1, n) * (nrows + ncols - 1)),
                       np.maximum(nnz, 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        frame = pd.DataFrame({
            "nrows": nrows, "ncols": ncols, "nnz": nnz,
            "density": nnz / (nrows * ncols),
            "mean": mean, "sd": sd,
            "cov": np.where(mean > 0, sd / mean, 0.0),
            "max": mx, "min": mn,
            "maxavg": mx - mean,
            "distavg": rng.uniform(0, 1, n) * ncols,
            "clusteravg": rng.uniform(0, 1, n) * ncols,
            "fill": np.where(nnz > 0, nrows * mx / nnz, 0.0),
            "ndiag": ndiag,
            "diagfill": np.where(nnz > 0, nrows * ndiag / nnz, 0.0),
        })
    return frame[FEATURE_NAMES]


def _labeled(frame: pd.DataFrame, labels: np.ndarray) -> pd.DataFrame:
    out = frame.copy()
    out["label"] = labels
    return out


def format_dataset(rng: np.random.Generator, n: int = 5000) -> pd.DataFrame:
    frame = sample_features(rng, n)
    diagonal = (frame["ndiag"] <= 32) & (frame["diagfill"] <= 1.5)
    return _labeled(frame, np.where(diagonal, "DIA", "CSR"))


def coo_lib_dataset(rng: np.random.Generator, n: int = 5000) -> pd.DataFrame:
    frame = sample_features(rng, n)
    return _labeled(frame, np.where(frame["density"] > 0.05, "LibB", "LibA"))


def csr_lib_dataset(rng: np.random.Generator, n: int = 5000) -> pd.DataFrame:
    frame = sample_features(rng, n)
    labels = np.select(
        [frame["cov"] <= 0.5, frame["cov"] <= 1.5],
        ["LibA", "LibB"], default="LibC")
    return _labeled(frame, labels)


def ell_lib_dataset(rng: np.random.Generator, n: int = 5000) -> pd.DataFrame:
    frame = sample_features(rng, n)
    return _labeled(frame, np.where(frame["maxavg"] <= 20, "LibA", "LibC"))


def tpv_dataset(rng: np.random.Generator, n: int = 5000) -> pd.DataFrame:
    frame = sample_features(rng, n)
    labels = np.select(
        [frame["mean"] <= 4, frame["mean"] <= 8, frame["mean"] <= 16,
         frame["mean"] <= 32],
        ["2", "4", "8", "16"], default="32")
    return _labeled(frame, labels)


GENERATORS = {
    "FORMAT": format_dataset,
    "COO-LIB": coo_lib_dataset,
    "CSR-LIB": csr_lib_dataset,
    "ELL-LIB": ell_lib_dataset,
    "CSR-TPV": tpv_dataset,
}


def synthetic_suite(seed: int = 7, n: int = 5000) -> dict[str, pd.DataFrame]:
    rng = np.random.default_rng(seed)
    return {name: gen(rng, n) for name, gen in GENERATORS.items()}
