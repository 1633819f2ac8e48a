"""Global forecasting model zoo behind one fit/predict interface."""

from retrainbench.models.base import (
    FittedModel,
    Learner,
    ModelError,
    ModelSpec,
    fit,
    get_learner,
    model_kinds,
    predict,
)

# Importing the kind modules registers their learners.
from retrainbench.models import linear, mlp, naive, trees  # noqa: F401

__all__ = [
    "FittedModel",
    "Learner",
    "ModelError",
    "ModelSpec",
    "fit",
    "predict",
    "get_learner",
    "model_kinds",
]
