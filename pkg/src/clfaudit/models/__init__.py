"""The three classifier families behind one prediction contract."""
from __future__ import annotations

import numpy as np

from ..errors import NotApplicable
from .forest import DecisionTree, FittedForest, fit_random_forest, grow_tree
from .logistic import FittedLogistic, ParamEstimate, fit_logistic
from .mlogrm import FittedMlogrm, fit_mlogrm

__all__ = [
    "DecisionTree", "FittedForest", "FittedLogistic", "FittedMlogrm", "ParamEstimate",
    "fit_logistic", "fit_mlogrm", "fit_random_forest", "grow_tree",
    "predict_proba", "parameters", "vim", "is_parametric",
]


def predict_proba(model, X, groups=None) -> np.ndarray:
    """P(y = 1) per row. ``groups`` holds group names and only matters for the multilevel model."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(model.feature_names):
        raise ValueError(f"expected {len(model.feature_names)} feature columns, got {X.shape[1]}")
    return model.predict_proba(X, groups)


def is_parametric(model) -> bool:
    return isinstance(model, (FittedLogistic, FittedMlogrm))


def parameters(model) -> list[ParamEstimate]:
    if isinstance(model, FittedForest):
        raise NotApplicable("random forests have no model parameters")
    return model.coefficients()


def vim(model) -> np.ndarray:
    if not isinstance(model, FittedForest):
        raise NotApplicable("variable importance is defined for forests only")
    return model.vim()
