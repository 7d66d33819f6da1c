"""Portable tree-ensemble schema: export from sklearn, reference evaluation.

The exported document is the contract with the runtime: per-class lists of
binary trees ({feature_index, threshold, left, right} internals, {score}
leaves), summed per class, argmax label with ties to the lowest class index.
Every prediction this package reports runs through :func:`predict_doc` over
the exported structure, so file round-trips are exact by construction.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

# Canonical feature column order shared with the runtime's CSVs and models.
FEATURE_NAMES = ["nrows", "ncols", "nnz", "density", "mean", "sd", "cov",
                 "max", "min", "maxavg", "distavg", "clusteravg", "fill",
                 "ndiag", "diagfill"]

MODEL_NAMES = ["FORMAT", "COO-LIB", "CSR-LIB", "ELL-LIB", "CSR-TPV"]


def _export_tree(tree, node: int, scale: float) -> dict:
    left = tree.children_left[node]
    if left == -1:
        return {"score": float(tree.value[node][0][0]) * scale}
    return {"feature_index": int(tree.feature[node]),
            "threshold": float(tree.threshold[node]),
            "left": _export_tree(tree, left, scale),
            "right": _export_tree(tree, tree.children_right[node], scale)}


def export_gradient_boosting(clf, classes: list[str]) -> dict:
    """Build the portable document from a fitted GradientBoostingClassifier.

    The classifier must be fitted with ``init="zero"`` so the raw scores are
    exactly the learning-rate-scaled tree sums. Binary problems train trees
    for the second class only; the first class gets a zero leaf.
    """
    lr = float(clf.learning_rate)
    if len(classes) == 2:
        trees = [[{"score": 0.0}],
                 [_export_tree(est.tree_, 0, lr) for est in clf.estimators_[:, 0]]]
    else:
        trees = [[_export_tree(est.tree_, 0, lr) for est in clf.estimators_[:, k]]
                 for k in range(len(classes))]
    return {"schema_version": SCHEMA_VERSION,
            "feature_names": list(FEATURE_NAMES),
            "classes": list(classes),
            "trees": trees}


def _walk(node: dict, row) -> float:
    while "score" not in node:
        node = node["left"] if row[node["feature_index"]] <= node["threshold"] \
            else node["right"]
    return node["score"]


def predict_doc(doc: dict, row) -> str:
    """Reference evaluation of one row: summed leaf scores, argmax label."""
    best_k, best_sum = 0, None
    for k, class_trees in enumerate(doc["trees"]):
        total = 0.0
        for tree in class_trees:
            total += _walk(tree, row)
        if best_sum is None or total > best_sum:
            best_k, best_sum = k, total
    return doc["classes"][best_k]


def predict_doc_batch(doc: dict, rows: np.ndarray) -> list[str]:
    return [predict_doc(doc, row) for row in np.asarray(rows, dtype=np.float64)]


def dump_model(doc: dict, path: Path) -> None:
    """Deterministic serialization: identical documents give identical bytes."""
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")


def load_model_doc(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
