"""Conditional predictive impact of feature subsets.

For one dataset the procedure is: fit a knockoff sampler on the full
feature matrix and draw X_tilde once; for every resampling split fit the
learner on the training rows, score the test rows with the original
features and again with the subset swapped for its knockoffs; pool the
per-row loss differences across splits and test their mean.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .data import Dataset, FeatureSubset, RngStream, as_subset
from .inference import FisherConfig, InferenceError, fisher_exact_cpi, t_test_cpi, wls_test_cpi
from .knockoffs import fit_gaussian_knockoffs, sample_knockoffs
from .learners import make_learner, pointwise_loss
from .learners.losses import Loss
from .resampling import Holdout, RiskEstimator, make_splits, parse_risk
from .results import CpiTestResult, DeltaVector

INFERENCE_METHODS = ("t", "fisher", "wls")

KnockoffSampler = Callable[[np.ndarray, RngStream], np.ndarray]


class CpiError(ValueError):
    pass


def gaussian_knockoff_sampler(x: np.ndarray, rng: RngStream) -> np.ndarray:
    return sample_knockoffs(fit_gaussian_knockoffs(x), x, rng)


def shrinkage_sampler(method: str) -> KnockoffSampler:
    """Gaussian knockoff sampler with the given covariance shrinkage rule."""
    def sampler(x: np.ndarray, rng: RngStream) -> np.ndarray:
        return sample_knockoffs(fit_gaussian_knockoffs(x, method), x, rng)
    return sampler


def compute_delta(model, loss: Loss | str, z_test: Dataset, z_tilde_test: Dataset) -> DeltaVector:
    """Per-row ``L(f, z_tilde_i) - L(f, z_i)`` for a fitted model."""
    if z_test.n != z_tilde_test.n or not np.array_equal(z_test.y, z_tilde_test.y):
        raise CpiError("original and knockoff test sets must hold the same rows")
    lo = pointwise_loss(loss, z_test.y, model.predict(z_test.x))
    lk = pointwise_loss(loss, z_tilde_test.y, model.predict(z_tilde_test.x))
    return DeltaVector.from_losses(lo, lk)


def _check_setup(z: Dataset, loss: Loss, inference: str) -> None:
    if not loss.compatible_with(z.task):
        raise CpiError(f"loss {loss.value!r} needs a classification task")
    if inference not in INFERENCE_METHODS:
        raise CpiError(f"unknown inference method {inference!r}; use one of {INFERENCE_METHODS}")


def cpi_deltas(z: Dataset, subsets: Sequence[FeatureSubset | Sequence[int] | int], learner,
               loss: Loss | str = Loss.MSE, risk: RiskEstimator | str = Holdout(),
               rng: RngStream | None = None, x_tilde: np.ndarray | None = None,
               knockoff_sampler: KnockoffSampler = gaussian_knockoff_sampler) -> list[DeltaVector]:
    """Pooled out-of-sample loss differences for each subset.

    The learner is fitted once per split and shared by all subsets; entries
    are ordered by split, then by row id within the split.
    """
    rng = rng if rng is not None else RngStream(0)
    learner = make_learner(learner)
    loss = Loss.parse(loss)
    risk = parse_risk(risk)
    subsets = [as_subset(s, z.p) for s in subsets]
    if x_tilde is None:
        x_tilde = knockoff_sampler(z.x, rng.child("knockoffs"))
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    if x_tilde.shape != z.x.shape:
        raise CpiError(f"knockoff matrix shape {x_tilde.shape} != data shape {z.x.shape}")
    splits = make_splits(risk, z.n, rng.child("splits"))
    fit_rng = rng.child("fit")
    parts: list[list] = [[] for _ in subsets]
    for k, (train, test) in enumerate(splits):
        model = learner.fit(z.x[train], z.y[train], z.task, fit_rng.child(k))
        y_test = z.y[test]
        x_test = z.x[test]
        lo = pointwise_loss(loss, y_test, model.predict(x_test))
        for s_idx, sub in enumerate(subsets):
            cols = list(sub.indices)
            x_sub = x_test.copy()
            x_sub[:, cols] = x_tilde[test][:, cols]
            lk = pointwise_loss(loss, y_test, model.predict(x_sub))
            parts[s_idx].append((lo, lk, test, np.full(test.shape[0], k)))
    return [DeltaVector.from_losses(*(np.concatenate(c) for c in zip(*p))) for p in parts]


def infer(d: DeltaVector, inference: str = "t", alpha: float = 0.05,
          rng: RngStream | None = None, fisher: FisherConfig = FisherConfig(),
          wls_weights: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None) -> CpiTestResult:
    """Apply one of the inference procedures to a delta vector."""
    if inference == "t":
        return t_test_cpi(d, alpha)
    if inference == "fisher":
        return fisher_exact_cpi(d, fisher, rng, alpha)
    if inference == "wls":
        w = None if wls_weights is None else wls_weights(d.loss_orig, d.loss_ko)
        return wls_test_cpi(d.loss_orig, d.loss_ko, w, alpha)
    raise CpiError(f"unknown inference method {inference!r}")


def run_cpi_many(z: Dataset, subsets: Sequence[FeatureSubset | Sequence[int] | int], learner,
                 loss: Loss | str = Loss.MSE, risk: RiskEstimator | str = Holdout(),
                 inference: str = "t", alpha: float = 0.05, rng: RngStream | None = None,
                 fisher: FisherConfig = FisherConfig(), x_tilde: np.ndarray | None = None,
                 knockoff_sampler: KnockoffSampler = gaussian_knockoff_sampler,
                 wls_weights=None) -> list[CpiTestResult]:
    """``run_cpi`` for several subsets sharing one knockoff draw and one set of fits.

    Equal, subset by subset, to separate ``run_cpi`` calls with the same
    ``rng``.
    """
    rng = rng if rng is not None else RngStream(0)
    loss = Loss.parse(loss)
    _check_setup(z, loss, inference)
    subsets = [as_subset(s, z.p) for s in subsets]
    deltas = cpi_deltas(z, subsets, learner, loss, risk, rng, x_tilde, knockoff_sampler)
    inf_rng = rng.child("inference")
    out = []
    for sub, d in zip(subsets, deltas):
        if inference in ("t", "wls") and len(d) < 2:
            raise InferenceError(f"{inference} inference needs at least 2 out-of-sample losses")
        out.append(infer(d, inference, alpha, inf_rng.child(repr(sub.indices)), fisher, wls_weights))
    return out


def run_cpi(z: Dataset, subset: FeatureSubset | Sequence[int] | int, learner,
            loss: Loss | str = Loss.MSE, risk: RiskEstimator | str = Holdout(),
            inference: str = "t", alpha: float = 0.05, rng: RngStream | None = None,
            fisher: FisherConfig = FisherConfig(), x_tilde: np.ndarray | None = None,
            knockoff_sampler: KnockoffSampler = gaussian_knockoff_sampler,
            wls_weights=None) -> CpiTestResult:
    """Test whether ``subset`` improves the learner's out-of-sample loss
    beyond its knockoff copy, conditional on the remaining features."""
    return run_cpi_many(z, [subset], learner, loss, risk, inference, alpha, rng, fisher,
                        x_tilde, knockoff_sampler, wls_weights)[0]


__all__ = [
    "CpiError",
    "INFERENCE_METHODS",
    "compute_delta",
    "cpi_deltas",
    "gaussian_knockoff_sampler",
    "infer",
    "run_cpi",
    "run_cpi_many",
    "shrinkage_sampler",
]
