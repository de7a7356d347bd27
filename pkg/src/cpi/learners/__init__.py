"""Supervised learners and losses.

A learner is any object with ``fit(x, y, task, rng) -> model`` where
``model.predict(x)`` returns real predictions (regression) or P(y = 1)
(classification). Built-ins are selected by identifier through
:func:`make_learner`.
"""
from __future__ import annotations

from typing import Any, Mapping

import numpy as np

from ..data import Dataset, RngStream
from .base import FittedModel, Learner, LearnerError, SingularDesignError
from .forest import ForestModel, RandomForest
from .lasso import Lasso, LassoModel, fit_lasso, kkt_violation, lambda_grid, lasso_cv, lasso_path
from .linear import OLS, ConvergenceWarning, LinearModel, Logistic, Ridge
from .losses import Loss, loss, pointwise_loss

LEARNERS = {"ols": OLS, "ridge": Ridge, "logistic": Logistic, "lasso": Lasso, "rf": RandomForest}

# positional shorthand "kind:a:b" maps onto these fields
_POSITIONAL = {
    "ols": (),
    "ridge": ("lam",),
    "logistic": ("max_iter", "tol"),
    "lasso": ("cv_folds", "n_lambda"),
    "rf": ("n_trees", "mtry", "min_node", "max_depth"),
}


def _coerce(v: Any) -> Any:
    if isinstance(v, str):
        try:
            return int(v)
        except ValueError:
            return float(v)
    if isinstance(v, list):
        return tuple(v)
    return v


def make_learner(spec: "str | Mapping[str, Any] | Learner") -> Learner:
    """Build a learner from ``"rf"``, ``"rf:100"``, ``"ridge:0.5"`` or
    ``{"kind": "rf", "n_trees": 100}``; learner objects pass through."""
    if not isinstance(spec, (str, Mapping)):
        if not hasattr(spec, "fit"):
            raise LearnerError(f"{spec!r} is not a learner (no fit method)")
        return spec
    if isinstance(spec, str):
        kind, *args = spec.split(":")
        kwargs = {}
        fields = _POSITIONAL.get(kind, ())
        if len(args) > len(fields):
            raise LearnerError(f"too many parameters for learner {kind!r}")
        kwargs = {f: _coerce(a) for f, a in zip(fields, args) if a != ""}
    else:
        params = dict(spec)
        kind = params.pop("kind", None)
        kwargs = {k: _coerce(v) for k, v in params.items()}
    if kind not in LEARNERS:
        raise LearnerError(f"unknown learner {kind!r}; valid identifiers: {sorted(LEARNERS)}")
    try:
        return LEARNERS[kind](**kwargs)
    except TypeError as exc:
        raise LearnerError(f"bad parameters for learner {kind!r}: {exc}") from None


def fit(spec: Learner, z: Dataset, rng: RngStream | None = None) -> FittedModel:
    return spec.fit(z.x, z.y, z.task, rng)


def predict(model: FittedModel, x: np.ndarray) -> np.ndarray:
    return model.predict(x)


__all__ = [
    "ConvergenceWarning",
    "FittedModel",
    "ForestModel",
    "LEARNERS",
    "Lasso",
    "LassoModel",
    "Learner",
    "LearnerError",
    "LinearModel",
    "Logistic",
    "Loss",
    "OLS",
    "RandomForest",
    "Ridge",
    "SingularDesignError",
    "fit",
    "fit_lasso",
    "kkt_violation",
    "lambda_grid",
    "lasso_cv",
    "lasso_path",
    "loss",
    "make_learner",
    "pointwise_loss",
    "predict",
]
