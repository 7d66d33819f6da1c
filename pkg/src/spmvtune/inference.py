"""Portable tree-ensemble classifiers and the cascaded configuration decision.

Model files are self-describing JSON (see docs/model_schema.md): per-class
lists of binary trees whose leaf scores are summed per class; the predicted
label is the argmax, ties going to the lowest class index. Trees are
flattened into node arrays at load time and every tree is walked in lockstep
with vectorized gathers, which keeps a full cascade well under a millisecond.

The cascade stages a prediction per configuration axis: storage format first,
then the library variant for that format, then the lane width when the
lane-vectorized CSR kernel was chosen. Each stage's decision is emitted as
soon as it is known so a running solver can act on it immediately.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from os import PathLike
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ModelSchemaError
from .features import FEATURE_NAMES, FeatureVector
from .formats import FormatTag
from .kernels import LANE_WIDTHS, Library, SpmvConfig

SCHEMA_VERSION = 1

# On-disk names for the five cascade models.
MODEL_FILENAMES = {
    "FORMAT": "FORMAT.json",
    "COO-LIB": "COO-LIB.json",
    "CSR-LIB": "CSR-LIB.json",
    "ELL-LIB": "ELL-LIB.json",
    "CSR-TPV": "CSR-TPV.json",
}

_ALLOWED_LABELS = {
    "FORMAT": {f.value for f in FormatTag},
    "COO-LIB": {Library.LIB_A.value, Library.LIB_B.value},
    "CSR-LIB": {lib.value for lib in Library},
    "ELL-LIB": {Library.LIB_A.value, Library.LIB_C.value},
    "CSR-TPV": {str(w) for w in LANE_WIDTHS},
}

# Lane width used when the format stage picks CSR before the lane stage has
# reported; replaced once the lane model answers.
INTERIM_LANE_WIDTH = 32


class TreeEnsembleModel:
    """Additive per-class binary trees with array-based lockstep evaluation."""

    def __init__(self, classes, feature_names, trees):
        self.classes = tuple(classes)
        self.feature_names = tuple(feature_names)
        self.feature_count = len(self.feature_names)
        self._trees = trees
        self._flatten(trees)

    def _flatten(self, trees):
        feat, thr, left, right, score = [], [], [], [], []

        def add(node) -> tuple[int, int]:
            idx = len(feat)
            if "score" in node:
                # Leaves self-loop so lockstep walking can overrun uniformly.
                feat.append(0)
                thr.append(0.0)
                left.append(idx)
                right.append(idx)
                score.append(float(node["score"]))
                return idx, 1
            feat.append(int(node["feature_index"]))
            thr.append(float(node["threshold"]))
            left.append(-1)
            right.append(-1)
            score.append(0.0)
            li, ld = add(node["left"])
            ri, rd = add(node["right"])
            left[idx], right[idx] = li, ri
            return idx, 1 + max(ld, rd)

        roots, tree_class, depth = [], [], 0
        for k, class_trees in enumerate(trees):
            for t in class_trees:
                root, d = add(t)
                roots.append(root)
                tree_class.append(k)
                depth = max(depth, d)
        self._feat = np.array(feat, dtype=np.int64)
        self._thr = np.array(thr, dtype=np.float64)
        self._left = np.array(left, dtype=np.int64)
        self._right = np.array(right, dtype=np.int64)
        self._score = np.array(score, dtype=np.float64)
        self._roots = np.array(roots, dtype=np.int64)
        self._tree_class = np.array(tree_class, dtype=np.int64)
        self._max_depth = depth

    @property
    def tree_counts(self) -> list[int]:
        return [len(ts) for ts in self._trees]

    def predict(self, features) -> tuple[str, np.ndarray]:
        """Return (label, per-class summed leaf scores)."""
        x = features.to_array() if isinstance(features, FeatureVector) \
            else np.asarray(features, dtype=np.float64)
        ptr = self._roots.copy()
        for _ in range(self._max_depth - 1):
            go_left = x[self._feat[ptr]] <= self._thr[ptr]
            ptr = np.where(go_left, self._left[ptr], self._right[ptr])
        scores = np.bincount(self._tree_class, weights=self._score[ptr],
                             minlength=len(self.classes))
        label = self.classes[int(np.argmax(scores))]
        return label, scores

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION,
                "feature_names": list(self.feature_names),
                "classes": list(self.classes),
                "trees": self._trees}


def predict_class(model: TreeEnsembleModel, features) -> tuple[str, np.ndarray]:
    """Classify one feature vector; ties resolve to the lowest class index."""
    return model.predict(features)


def softmax(scores: np.ndarray) -> np.ndarray:
    """Normalized class scores for display; monotone, so argmax is unchanged."""
    z = np.exp(scores - scores.max())
    return z / z.sum()


def _require(d, key, path):
    if not isinstance(d, dict):
        raise ModelSchemaError(f"{path}: expected an object")
    if key not in d:
        raise ModelSchemaError(f"{path}.{key}: missing field")
    return d[key]


def _validate_node(node, path):
    if not isinstance(node, dict):
        raise ModelSchemaError(f"{path}: expected an object")
    if "score" in node:
        if not isinstance(node["score"], (int, float)) or \
                not math.isfinite(node["score"]):
            raise ModelSchemaError(f"{path}.score: must be a finite number")
        extra = set(node) - {"score"}
        if extra:
            raise ModelSchemaError(f"{path}: leaf has extra fields {sorted(extra)}")
        return
    for key in ("feature_index", "threshold", "left", "right"):
        if key not in node:
            raise ModelSchemaError(f"{path}.{key}: missing field")
    fi = node["feature_index"]
    if not isinstance(fi, int) or not 0 <= fi < len(FEATURE_NAMES):
        raise ModelSchemaError(f"{path}.feature_index: must be an integer in "
                               f"[0, {len(FEATURE_NAMES)})")
    th = node["threshold"]
    if not isinstance(th, (int, float)) or not math.isfinite(th):
        raise ModelSchemaError(f"{path}.threshold: must be a finite number")
    _validate_node(node["left"], f"{path}.left")
    _validate_node(node["right"], f"{path}.right")


def model_from_dict(doc: dict, source: str = "<model>") -> TreeEnsembleModel:
    """Validate a schema document and build the model. Raises ModelSchemaError."""
    version = _require(doc, "schema_version", source)
    if version != SCHEMA_VERSION:
        raise ModelSchemaError(f"{source}.schema_version: expected "
                               f"{SCHEMA_VERSION}, got {version!r}")
    names = _require(doc, "feature_names", source)
    if not isinstance(names, list) or len(names) != len(FEATURE_NAMES):
        raise ModelSchemaError(
            f"{source}.feature_names: expected {len(FEATURE_NAMES)} names")
    if tuple(names) != FEATURE_NAMES:
        raise ModelSchemaError(f"{source}.feature_names: must match the "
                               f"canonical order {list(FEATURE_NAMES)}")
    classes = _require(doc, "classes", source)
    if not isinstance(classes, list) or not classes or \
            not all(isinstance(c, str) for c in classes):
        raise ModelSchemaError(f"{source}.classes: expected a non-empty list "
                               f"of strings")
    if len(set(classes)) != len(classes):
        raise ModelSchemaError(f"{source}.classes: duplicate labels")
    trees = _require(doc, "trees", source)
    if not isinstance(trees, list) or len(trees) != len(classes):
        raise ModelSchemaError(f"{source}.trees: expected one tree list per class")
    for k, class_trees in enumerate(trees):
        if not isinstance(class_trees, list) or not class_trees:
            raise ModelSchemaError(f"{source}.trees[{k}]: expected a non-empty "
                                   f"list of trees")
        for t, tree in enumerate(class_trees):
            _validate_node(tree, f"{source}.trees[{k}][{t}]")
    return TreeEnsembleModel(classes, names, trees)


def load_model(path: str | PathLike) -> TreeEnsembleModel:
    """Load and validate one model file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelSchemaError(f"{path.name}: not valid JSON ({exc})") from exc
    return model_from_dict(doc, source=path.name)


class CascadeStage(str, Enum):
    FORMAT = "Format"
    LIBRARY = "Library"
    LANE_WIDTH = "LaneWidth"


@dataclass(frozen=True)
class CascadeDecision:
    """One stage's outcome: the partial configuration known so far."""

    stage: CascadeStage
    format: FormatTag
    library: Library | None
    lane_width: int | None
    is_terminal: bool
    scores: dict[str, float] | None = None

    def implied_config(self) -> SpmvConfig:
        """The runnable configuration this partial decision stands for.

        Unresolved axes fall back to the library that implements every format
        and, for the lane-vectorized CSR kernel, an interim lane width.
        """
        lib = self.library if self.library is not None else Library.LIB_A
        lane = self.lane_width
        if lane is None and self.format is FormatTag.CSR and lib is Library.LIB_A:
            lane = INTERIM_LANE_WIDTH
        return SpmvConfig(self.format, lib, lane)


@dataclass
class CascadeModelSet:
    """The five models driving the staged prediction."""

    format_model: TreeEnsembleModel
    coo_lib_model: TreeEnsembleModel
    csr_lib_model: TreeEnsembleModel
    ell_lib_model: TreeEnsembleModel
    csr_tpv_model: TreeEnsembleModel

    _BY_NAME = (("FORMAT", "format_model"), ("COO-LIB", "coo_lib_model"),
                ("CSR-LIB", "csr_lib_model"), ("ELL-LIB", "ell_lib_model"),
                ("CSR-TPV", "csr_tpv_model"))

    def __post_init__(self):
        for name, attr in self._BY_NAME:
            model = getattr(self, attr)
            bad = set(model.classes) - _ALLOWED_LABELS[name]
            if bad:
                raise ModelSchemaError(
                    f"{name} model: labels {sorted(bad)} outside the allowed "
                    f"set {sorted(_ALLOWED_LABELS[name])}")

    @classmethod
    def load_dir(cls, directory: str | PathLike) -> "CascadeModelSet":
        directory = Path(directory)
        kwargs = {}
        for name, attr in cls._BY_NAME:
            path = directory / MODEL_FILENAMES[name]
            if not path.exists():
                raise ModelSchemaError(f"missing model file {path}")
            kwargs[attr] = load_model(path)
        return cls(**kwargs)


def _scores_dict(model: TreeEnsembleModel, scores: np.ndarray) -> dict[str, float]:
    return {c: float(s) for c, s in zip(model.classes, scores)}


def cascade_predict(models: CascadeModelSet, features,
                    emit: Callable[[CascadeDecision], None] | None = None,
                    ) -> SpmvConfig:
    """Run the staged prediction, emitting each decision as it completes.

    Stage routing: the format model always runs first. COO and ELL continue
    to their library models and stop; CSR continues to its library model and,
    only when the lane-vectorized suite wins, to the lane-width model; DIA and
    HYB terminate immediately on the only suite that implements them.
    """
    x = features.to_array() if isinstance(features, FeatureVector) \
        else np.asarray(features, dtype=np.float64)

    def send(decision: CascadeDecision):
        if emit is not None:
            emit(decision)

    fmt_label, fmt_scores = models.format_model.predict(x)
    fmt = FormatTag(fmt_label)
    if fmt in (FormatTag.DIA, FormatTag.HYB):
        send(CascadeDecision(CascadeStage.FORMAT, fmt, Library.LIB_A, None,
                             True, _scores_dict(models.format_model, fmt_scores)))
        return SpmvConfig(fmt, Library.LIB_A)
    send(CascadeDecision(CascadeStage.FORMAT, fmt, None, None, False,
                         _scores_dict(models.format_model, fmt_scores)))

    lib_model = {FormatTag.COO: models.coo_lib_model,
                 FormatTag.CSR: models.csr_lib_model,
                 FormatTag.ELL: models.ell_lib_model}[fmt]
    lib_label, lib_scores = lib_model.predict(x)
    lib = Library(lib_label)
    needs_lane = fmt is FormatTag.CSR and lib is Library.LIB_A
    send(CascadeDecision(CascadeStage.LIBRARY, fmt, lib, None, not needs_lane,
                         _scores_dict(lib_model, lib_scores)))
    if not needs_lane:
        return SpmvConfig(fmt, lib)

    lane_label, lane_scores = models.csr_tpv_model.predict(x)
    lane = int(lane_label)
    send(CascadeDecision(CascadeStage.LANE_WIDTH, fmt, lib, lane, True,
                         _scores_dict(models.csr_tpv_model, lane_scores)))
    return SpmvConfig(fmt, lib, lane)
