"""Training pipeline: harness CSVs in, portable model files and metrics out."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.ensemble import GradientBoostingClassifier
from sklearn.model_selection import train_test_split

from .schema import (FEATURE_NAMES, MODEL_NAMES, dump_model,
                     export_gradient_boosting, load_model_doc,
                     predict_doc_batch)

log = logging.getLogger(__name__)

DATASET_FILES = {name: f"{name}.csv" for name in MODEL_NAMES}
MODEL_FILES = {name: f"{name}.json" for name in MODEL_NAMES}


class TrainerError(Exception):
    pass


@dataclass
class TrainConfig:
    seed: int = 7
    test_fraction: float = 0.2
    n_trees: int = 60
    max_depth: int = 3
    learning_rate: float = 0.1


@dataclass
class ModelMetrics:
    test_accuracy: float
    train_rows: int
    test_rows: int
    classes: list[str]
    mean_infer_seconds: float
    degenerate_split: bool = False

    def to_dict(self) -> dict:
        return {"test_accuracy": self.test_accuracy,
                "train_rows": self.train_rows, "test_rows": self.test_rows,
                "classes": self.classes,
                "mean_infer_seconds": self.mean_infer_seconds,
                "degenerate_split": self.degenerate_split}


def read_dataset(path: Path) -> pd.DataFrame:
    """Read one harness CSV; the leading '#' lines carry the host fingerprint."""
    if not Path(path).exists():
        raise TrainerError(f"missing dataset {path}")
    frame = pd.read_csv(path, comment="#")
    expected = FEATURE_NAMES + ["label"]
    if list(frame.columns) != expected:
        raise TrainerError(f"{path}: columns {list(frame.columns)} do not "
                           f"match the expected schema {expected}")
    if frame.empty:
        raise TrainerError(f"{path}: dataset is empty")
    frame["label"] = frame["label"].astype(str)
    return frame


def stratified_split(frame: pd.DataFrame, config: TrainConfig):
    """Stratified held-out split; degenerate datasets test on what they have.

    Returns (train, test, degenerate). When some class has a single row a
    stratified split is impossible, so the model trains and is scored on the
    full data, flagged as degenerate.
    """
    counts = frame["label"].value_counts()
    test_n = int(round(len(frame) * config.test_fraction))
    if counts.min() < 2 or test_n < len(counts):
        return frame, frame, True
    train, test = train_test_split(frame, test_size=config.test_fraction,
                                   random_state=config.seed,
                                   stratify=frame["label"])
    return train, test, False


def train_one(frame: pd.DataFrame, config: TrainConfig,
              name: str = "model") -> tuple[dict, ModelMetrics, pd.DataFrame]:
    """Fit one classifier and export it.

    Returns (portable document, metrics, held-out frame). All reported
    predictions come from the exported document, so the metrics describe the
    artifact that ships, not the in-memory sklearn object.
    """
    classes = sorted(frame["label"].unique())
    if len(classes) < 2:
        raise TrainerError(
            f"{name}: needs at least two classes, got {classes}")
    train, test, degenerate = stratified_split(frame, config)
    if degenerate:
        log.warning("%s: class too small for a stratified split; "
                    "scoring on the training rows", name)
    clf = GradientBoostingClassifier(
        n_estimators=config.n_trees, max_depth=config.max_depth,
        learning_rate=config.learning_rate, random_state=config.seed,
        init="zero")
    clf.fit(train[FEATURE_NAMES].to_numpy(), train["label"].to_numpy())
    if list(clf.classes_) != classes:
        raise TrainerError(f"{name}: unexpected class order from the fit")
    doc = export_gradient_boosting(clf, classes)

    rows = test[FEATURE_NAMES].to_numpy(dtype=np.float64)
    t0 = time.perf_counter()
    predicted = predict_doc_batch(doc, rows)
    per_row = (time.perf_counter() - t0) / max(len(rows), 1)
    accuracy = float(np.mean(np.asarray(predicted) == test["label"].to_numpy()))
    metrics = ModelMetrics(test_accuracy=accuracy, train_rows=len(train),
                           test_rows=len(test), classes=classes,
                           mean_infer_seconds=per_row,
                           degenerate_split=degenerate)
    return doc, metrics, test


def heldout_dump(docs: dict[str, dict],
                 heldout: dict[str, pd.DataFrame]) -> dict:
    """Predictions of the exported models on their own held-out rows."""
    models = {}
    for name, doc in docs.items():
        rows = heldout[name][FEATURE_NAMES].to_numpy(dtype=np.float64)
        models[name] = {"rows": [[float(v) for v in row] for row in rows],
                        "labels": predict_doc_batch(doc, rows)}
    return {"schema_version": 1, "feature_names": list(FEATURE_NAMES),
            "models": models}


def train_models(dataset_dir: Path, out_dir: Path,
                 config: TrainConfig | None = None) -> dict[str, ModelMetrics]:
    """Train all five cascade models and write models, metrics, and the dump."""
    config = config or TrainConfig()
    dataset_dir, out_dir = Path(dataset_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    docs: dict[str, dict] = {}
    heldout: dict[str, pd.DataFrame] = {}
    metrics: dict[str, ModelMetrics] = {}
    for name in MODEL_NAMES:
        frame = read_dataset(dataset_dir / DATASET_FILES[name])
        doc, model_metrics, test = train_one(frame, config, name)
        docs[name] = doc
        heldout[name] = test
        metrics[name] = model_metrics
        dump_model(doc, out_dir / MODEL_FILES[name])
        reloaded = load_model_doc(out_dir / MODEL_FILES[name])
        rows = test[FEATURE_NAMES].to_numpy(dtype=np.float64)
        if predict_doc_batch(reloaded, rows) != predict_doc_batch(doc, rows):
            raise TrainerError(f"{name}: reloaded file predictions diverged")
        log.info("%s: accuracy %.4f on %d held-out rows", name,
                 model_metrics.test_accuracy, model_metrics.test_rows)
    (out_dir / "metrics.json").write_text(json.dumps(
        {name: m.to_dict() for name, m in metrics.items()},
        sort_keys=True, indent=1) + "\n")
    (out_dir / "heldout_predictions.json").write_text(
        json.dumps(heldout_dump(docs, heldout), sort_keys=True) + "\n")
    return metrics
