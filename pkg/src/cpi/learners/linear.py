"""Least squares, ridge and IRLS logistic regression."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from ..data import Task
from .base import (FittedModel, LearnerError, SingularDesignError, check_predict_input,
                   require_task)

ETA_CAP = 30.0


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LinearModel(FittedModel):
    intercept: float
    coef: np.ndarray
    task: Task = Task.REGRESSION
    converged: bool = True
    n_iter: int = 0

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = check_predict_input(x, self.coef.shape[0])
        eta = self.intercept + x @ self.coef
        if self.task is Task.BINARY_CLASSIFICATION:
            return 1.0 / (1.0 + np.exp(-np.clip(eta, -ETA_CAP, ETA_CAP)))
        return eta


@dataclass(frozen=True)
class OLS:
    name: ClassVar[str] = "ols"

    def fit(self, x, y, task=Task.REGRESSION, rng=None) -> LinearModel:
        require_task(task, self.name, Task.REGRESSION)
        x = np.asarray(x, dtype=np.float64)
        design = np.column_stack([np.ones(x.shape[0]), x])
        coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank < design.shape[1]:
            raise SingularDesignError(
                f"singular normal equations: design rank {rank} < {design.shape[1]} columns")
        return LinearModel(float(coef[0]), coef[1:], Task.REGRESSION)


@dataclass(frozen=True)
class Ridge:
    lam: float = 1.0
    name: ClassVar[str] = "ridge"

    def __post_init__(self):
        if not self.lam > 0:
            raise LearnerError("ridge penalty must be positive")

    def fit(self, x, y, task=Task.REGRESSION, rng=None) -> LinearModel:
        require_task(task, self.name, Task.REGRESSION)
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        xm, ym = x.mean(axis=0), y.mean()
        xc = x - xm
        gram = xc.T @ xc + self.lam * np.eye(x.shape[1])
        coef = np.linalg.solve(gram, xc.T @ (y - ym))
        return LinearModel(float(ym - xm @ coef), coef, Task.REGRESSION)


@dataclass(frozen=True)
class Logistic:
    """IRLS with the linear predictor capped at +/-30 so separable data
    stalls at max_iter instead of overflowing."""

    max_iter: int = 25
    tol: float = 1e-8
    name: ClassVar[str] = "logistic"

    def __post_init__(self):
        if self.max_iter < 1 or not self.tol > 0:
            raise LearnerError("logistic needs max_iter >= 1 and tol > 0")

    def fit(self, x, y, task=Task.BINARY_CLASSIFICATION, rng=None) -> LinearModel:
        require_task(task, self.name, Task.BINARY_CLASSIFICATION)
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        design = np.column_stack([np.ones(x.shape[0]), x])
        beta = np.zeros(design.shape[1])
        dev_old = np.inf
        converged = False
        it = 0
        for it in range(1, self.max_iter + 1):
            eta = np.clip(design @ beta, -ETA_CAP, ETA_CAP)
            mu = 1.0 / (1.0 + np.exp(-eta))
            w = np.maximum(mu * (1 - mu), 1e-10)
            working = eta + (y - mu) / w
            sw = np.sqrt(w)
            beta, *_ = np.linalg.lstsq(design * sw[:, None], working * sw, rcond=None)
            raw = design @ beta
            eta = np.clip(raw, -ETA_CAP, ETA_CAP)
            mu = np.clip(1.0 / (1.0 + np.exp(-eta)), 1e-15, 1 - 1e-15)
            dev = -2 * np.sum(y * np.log(mu) + (1 - y) * np.log1p(-mu))
            # a stalled deviance with predictors at the cap means separation
            capped = np.max(np.abs(raw)) >= ETA_CAP
            if abs(dev - dev_old) / (abs(dev) + 0.1) < self.tol and not capped:
                converged = True
                break
            dev_old = dev
        if not converged:
            warnings.warn(f"IRLS did not converge in {self.max_iter} iterations",
                          ConvergenceWarning, stacklevel=2)
        return LinearModel(float(beta[0]), beta[1:], Task.BINARY_CLASSIFICATION,
                           converged=converged, n_iter=it)
