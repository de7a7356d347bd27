"""Lasso by cyclic coordinate descent with warm-started paths and K-fold CV.

Objective on standardized features with an unpenalized intercept::

    (1 / 2n) * ||y - b0 - Xs @ beta||^2 + lam * ||beta||_1

Coefficients are kept on the standardized scale.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Sequence

import numpy as np

from .. import _kernels
from ..data import RngStream, Task
from .base import FittedModel, LearnerError, check_predict_input, require_task

# convergence thresholds on max col_sq * dbeta**2, relative to mean(yc**2)
DEFAULT_TOL = 1e-14
CV_TOL = 1e-8
MAX_SWEEPS = 100_000
# saturation rules for CV paths: stop once the fit explains this much of
# the deviance, or the next lambda gains less than this fraction
SATURATED_DEV_RATIO = 0.999
MIN_DEV_GAIN = 1e-5


@dataclass(frozen=True)
class LassoModel(FittedModel):
    means: np.ndarray
    sds: np.ndarray
    intercept: float
    coef: np.ndarray
    lam: float
    task: Task = Task.REGRESSION

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = check_predict_input(x, self.coef.shape[0])
        return self.intercept + ((x - self.means) / self.sds) @ self.coef


class _Standardized:
    """Training-set standardization; constant columns get sd 1 and stay at 0."""

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.means = x.mean(axis=0)
        sds = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.ones(x.shape[1])
        self.sds = np.where(sds > 0, sds, 1.0)
        self.xs = np.asfortranarray((x - self.means) / self.sds)
        self.ymean = float(y.mean())
        self.yc = y - self.ymean
        self.col_sq = np.einsum("ij,ij->j", self.xs, self.xs) / x.shape[0]

    def lambda_max(self) -> float:
        return float(np.max(np.abs(self.xs.T @ self.yc)) / self.xs.shape[0])


def lambda_grid(x: np.ndarray, y: np.ndarray, n_lambda: int = 100,
                min_ratio: float | None = None) -> np.ndarray:
    """Log-spaced descending grid from the all-zero threshold ``max|Xs'y|/n``."""
    x = np.asarray(x, dtype=np.float64)
    st = _Standardized(x, np.asarray(y, dtype=np.float64))
    lmax = st.lambda_max()
    if lmax <= 0:
        lmax = 1.0
    if min_ratio is None:
        min_ratio = 0.01 if x.shape[0] < x.shape[1] else 1e-4
    return np.geomspace(lmax, lmax * min_ratio, n_lambda)


def _path(st: _Standardized, lambdas: Sequence[float], tol: float,
          early_stop: bool = False) -> np.ndarray:
    """Warm-started coefficients along ``lambdas``.

    ``tol`` is relative to the null deviance ``mean(yc**2)``. With
    ``early_stop`` the path is cut once it saturates and the remaining rows
    repeat the last fit.
    """
    p = st.xs.shape[1]
    beta = np.zeros(p)
    resid = st.yc.copy()
    out = np.empty((len(lambdas), p))
    null_dev = float(st.yc @ st.yc) / st.yc.shape[0]
    thresh = tol * null_dev if null_dev > 0 else tol
    prev_ratio = 0.0
    for k, lam in enumerate(lambdas):
        _kernels.lasso_cd(st.xs, resid, beta, st.col_sq, float(lam), thresh, MAX_SWEEPS)
        out[k] = beta
        if early_stop and null_dev > 0:
            ratio = 1.0 - float(resid @ resid) / st.yc.shape[0] / null_dev
            if ratio >= SATURATED_DEV_RATIO or (k > 0 and ratio - prev_ratio < MIN_DEV_GAIN * ratio):
                out[k + 1:] = beta
                break
            prev_ratio = ratio
    return out


def lasso_path(x: np.ndarray, y: np.ndarray, lambdas: Sequence[float],
               tol: float = DEFAULT_TOL) -> np.ndarray:
    """Standardized-scale coefficients, one row per lambda (warm-started in the given order)."""
    st = _Standardized(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    return _path(st, lambdas, tol)


def fit_lasso(x: np.ndarray, y: np.ndarray, lam: float, tol: float = DEFAULT_TOL,
              lambdas: Sequence[float] | None = None) -> LassoModel:
    """Fit at one ``lam``. If ``lambdas`` is given, warm-start down that grid to ``lam``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    st = _Standardized(x, y)
    if lambdas is None:
        path_to = [lam]
    else:
        path_to = [l for l in lambdas if l > lam] + [lam]
    coef = _path(st, path_to, tol)[-1]
    return LassoModel(st.means, st.sds, st.ymean, coef, float(lam))


def kfold_ids(n: int, k: int, rng: RngStream) -> list[np.ndarray]:
    perm = rng.gen.permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def cv_errors(x: np.ndarray, y: np.ndarray, lambdas: Sequence[float], folds: int,
              rng: RngStream, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Mean held-out squared error per lambda, pooled over all held-out rows."""
    n = x.shape[0]
    sse = np.zeros(len(lambdas))
    for test in kfold_ids(n, folds, rng):
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        st = _Standardized(x[train], y[train])
        betas = _path(st, lambdas, max(tol, CV_TOL), early_stop=True)
        xs_test = (x[test] - st.means) / st.sds
        pred = st.ymean + xs_test @ betas.T
        sse += np.sum((y[test, None] - pred) ** 2, axis=0)
    return sse / n


def lasso_cv(spec: "Lasso", x: np.ndarray, y: np.ndarray, rng: RngStream | None = None):
    """Choose lambda minimizing K-fold CV error, refit on all rows.

    Returns ``(model, lambda_star)``; ties go to the larger lambda.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = spec.grid(x, y)
    if len(grid) == 1:
        lam = float(grid[0])
        return fit_lasso(x, y, lam, spec.tol), lam
    if x.shape[0] < spec.cv_folds:
        raise LearnerError(f"n = {x.shape[0]} is smaller than cv_folds = {spec.cv_folds}")
    if rng is None:
        rng = RngStream(0)
    err = cv_errors(x, y, grid, spec.cv_folds, rng, spec.tol)
    best = int(np.argmin(err))
    lam = float(grid[best])
    return fit_lasso(x, y, lam, spec.tol, lambdas=grid), lam


@dataclass(frozen=True)
class Lasso:
    """Lasso learner; ``fit`` tunes lambda by ``cv_folds``-fold CV over the grid.

    ``lambdas`` (descending) fixes the grid; otherwise ``n_lambda`` log-spaced
    values are derived from the training data.
    """

    lambdas: tuple[float, ...] | None = None
    cv_folds: int = 10
    n_lambda: int = 100
    lambda_min_ratio: float | None = None
    tol: float = DEFAULT_TOL
    name: ClassVar[str] = "lasso"

    def __post_init__(self):
        if self.lambdas is not None:
            lams = tuple(float(l) for l in self.lambdas)
            if not lams:
                raise LearnerError("empty lambda grid")
            if any(l < 0 for l in lams):
                raise LearnerError("lambda values must be nonnegative")
            if any(a < b for a, b in zip(lams, lams[1:])):
                raise LearnerError("lambda grid must be sorted in descending order")
            object.__setattr__(self, "lambdas", lams)
        if self.cv_folds < 2:
            raise LearnerError("cv_folds must be >= 2")
        if self.n_lambda < 1:
            raise LearnerError("n_lambda must be >= 1")

    def grid(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.lambdas is not None:
            return np.array(self.lambdas)
        return lambda_grid(x, y, self.n_lambda, self.lambda_min_ratio)

    def fit(self, x, y, task=Task.REGRESSION, rng=None) -> LassoModel:
        require_task(task, self.name, Task.REGRESSION)
        return lasso_cv(self, x, y, rng)[0]


def kkt_violation(model: LassoModel, x: np.ndarray, y: np.ndarray) -> float:
    """Largest deviation from the lasso optimality conditions."""
    st = _Standardized(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    r = st.yc - st.xs @ model.coef
    grad = -(st.xs.T @ r) / st.xs.shape[0]
    active = model.coef != 0
    viol_zero = np.maximum(np.abs(grad[~active]) - model.lam, 0.0)
    viol_active = np.abs(grad[active] + model.lam * np.sign(model.coef[active]))
    return float(max(viol_zero.max(initial=0.0), viol_active.max(initial=0.0)))
