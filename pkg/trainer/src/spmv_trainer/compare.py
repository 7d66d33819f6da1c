"""Informational accuracy/latency comparison across classifier families."""
from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.ensemble import (ExtraTreesClassifier, GradientBoostingClassifier,
                              HistGradientBoostingClassifier,
                              RandomForestClassifier)

from .schema import FEATURE_NAMES
from .train import TrainConfig, TrainerError, stratified_split

FAMILIES = ["gradient_boosting", "hist_gradient_boosting", "random_forest",
            "extra_trees"]


def _make_classifier(family: str, config: TrainConfig):
    if family == "gradient_boosting":
        return GradientBoostingClassifier(n_estimators=config.n_trees,
                                          max_depth=config.max_depth,
                                          learning_rate=config.learning_rate,
                                          random_state=config.seed)
    if family == "hist_gradient_boosting":
        return HistGradientBoostingClassifier(max_iter=config.n_trees,
                                              max_depth=config.max_depth,
                                              learning_rate=config.learning_rate,
                                              random_state=config.seed)
    if family == "random_forest":
        return RandomForestClassifier(n_estimators=config.n_trees,
                                      random_state=config.seed)
    if family == "extra_trees":
        return ExtraTreesClassifier(n_estimators=config.n_trees,
                                    random_state=config.seed)
    raise TrainerError(f"unknown family {family!r}")


@dataclass
class FamilyResult:
    family: str
    test_accuracy: float
    mean_infer_seconds: float
    normalized_time: float = 0.0

    def to_dict(self) -> dict:
        return {"family": self.family, "test_accuracy": self.test_accuracy,
                "mean_infer_seconds": self.mean_infer_seconds,
                "normalized_time": self.normalized_time}


def compare_families(frame: pd.DataFrame, config: TrainConfig | None = None,
                     families: list[str] | None = None) -> list[FamilyResult]:
    """Fit each family on the same split; report accuracy and min-max times."""
    config = config or TrainConfig()
    families = families or FAMILIES
    train, test, _ = stratified_split(frame, config)
    x_train = train[FEATURE_NAMES].to_numpy()
    y_train = train["label"].to_numpy()
    x_test = test[FEATURE_NAMES].to_numpy()
    y_test = test["label"].to_numpy()
    results = []
    for family in families:
        clf = _make_classifier(family, config)
        clf.fit(x_train, y_train)
        clf.predict(x_test[:1])  # warm
        t0 = time.perf_counter()
        predicted = clf.predict(x_test)
        per_row = (time.perf_counter() - t0) / max(len(x_test), 1)
        accuracy = float(np.mean(predicted == y_test))
        results.append(FamilyResult(family, accuracy, per_row))
    times = np.array([r.mean_infer_seconds for r in results])
    spread = times.max() - times.min()
    for r in results:
        r.normalized_time = float((r.mean_infer_seconds - times.min()) / spread) \
            if spread > 0 else 0.0
    return results


def format_table(results: list[FamilyResult]) -> str:
    lines = [f"{'family':<22} {'accuracy':>9} {'infer (us)':>11} "
             f"{'normalized':>11}"]
    for r in results:
        lines.append(f"{r.family:<22} {r.test_accuracy:>9.4f} "
                     f"{r.mean_infer_seconds * 1e6:>11.2f} "
                     f"{r.normalized_time:>11.3f}")
    return "\n".join(lines)
