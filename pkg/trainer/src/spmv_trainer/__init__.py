"""Offline trainer for the cascaded SpMV configuration classifiers."""

from .compare import FAMILIES, FamilyResult, compare_families
from .schema import (FEATURE_NAMES, MODEL_NAMES, dump_model,
                     export_gradient_boosting, load_model_doc, predict_doc,
                     predict_doc_batch)
from .synthetic import synthetic_suite
from .train import (TrainConfig, TrainerError, read_dataset, train_models,
                    train_one)

__version__ = "0.1.0"
