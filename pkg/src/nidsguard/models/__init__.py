"""Classifier families sharing one fit / predict_proba contract."""

from .core import (
    DEFAULTS,
    FAMILIES,
    ClassifierSpec,
    ModelError,
    TrainedModel,
    analytic_gradients,
    fit,
    gradient_check,
    predict_proba,
)
from .linear import DivergenceError
from .search import SEARCH_SPACE, sample_spec, within_space

__all__ = [
    "DEFAULTS", "FAMILIES", "SEARCH_SPACE", "ClassifierSpec", "DivergenceError", "ModelError",
    "TrainedModel", "analytic_gradients", "fit", "gradient_check", "predict_proba",
    "sample_spec", "within_space",
]
