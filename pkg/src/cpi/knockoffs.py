"""Second-order Gaussian model-X knockoffs.

Fits a Gaussian approximation N(mu, Sigma) to the feature distribution and
samples each knockoff row from the conditional law

    x_tilde | x ~ N(mu + (x - mu) @ (I - Sigma^-1 S), 2S - S Sigma^-1 S),
    S = diag(s),

which makes the joint covariance of (X, X_tilde)
``[[Sigma, Sigma - S], [Sigma - S, Sigma]]``. The response never enters.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import DataError, Dataset, FeatureSubset, RngStream, as_subset

SHRINKAGE_GRID = (0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
MIN_CORR_EIGENVALUE = 1e-3
CHOL_JITTER = 1e-10


class KnockoffError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianKnockoffModel:
    mu: np.ndarray
    sigma: np.ndarray
    s: np.ndarray
    cond_coef: np.ndarray
    cond_cov_chol: np.ndarray
    shrinkage: float = 0.0

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    @property
    def cond_cov(self) -> np.ndarray:
        s = np.diag(self.s)
        return 2 * s - s @ np.linalg.solve(self.sigma, s)

    def joint_cov(self) -> np.ndarray:
        """Target covariance of ``[X, X_tilde]``."""
        off = self.sigma - np.diag(self.s)
        return np.block([[self.sigma, off], [off, self.sigma]])

    @classmethod
    def from_params(cls, mu, sigma, s, shrinkage: float = 0.0) -> "GaussianKnockoffModel":
        mu = np.asarray(mu, dtype=np.float64)
        sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
        s = np.asarray(s, dtype=np.float64)
        p = mu.shape[0]
        if sigma.shape != (p, p) or s.shape != (p,):
            raise DataError(f"inconsistent shapes: mu {mu.shape}, sigma {sigma.shape}, s {s.shape}")
        if np.any(s < 0):
            raise KnockoffError("s must be nonnegative")
        for _ in range(20):
            sig_inv_s = np.linalg.solve(sigma, np.diag(s))
            v = 2 * np.diag(s) - np.diag(s) @ sig_inv_s
            v = 0.5 * (v + v.T)
            chol = _chol_with_floor(v)
            if chol is not None:
                break
            # round-off pushed V below zero; back s off slightly
            s = s * (1 - 1e-8)
        else:
            raise KnockoffError("conditional covariance is not positive semidefinite")
        cond_coef = np.eye(p) - sig_inv_s
        return cls(mu, sigma, s, cond_coef, chol, shrinkage)


def _chol_with_floor(v: np.ndarray) -> np.ndarray | None:
    if not np.any(v):
        return np.zeros_like(v)
    try:
        return np.linalg.cholesky(v)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(v + CHOL_JITTER * np.eye(v.shape[0]))
    except np.linalg.LinAlgError:
        return None


SHRINKAGE_METHODS = ("grid", "ledoit_wolf")


def ledoit_wolf_intensity(x: np.ndarray) -> float:
    """Ledoit-Wolf estimate of the optimal shrinkage weight toward
    ``mean(var) * I`` (population-moment form on centered data)."""
    xc = x - x.mean(axis=0)
    n, p = xc.shape
    emp = xc.T @ xc / n
    mu = np.trace(emp) / p
    delta = np.sum((emp - mu * np.eye(p)) ** 2) / p
    x2 = xc ** 2
    beta = (np.sum(x2.T @ x2) / n - np.sum(emp ** 2)) / (p * n)
    if delta <= 0:
        return 0.0
    return float(min(beta, delta) / delta)


def shrunk_covariance(x: np.ndarray, method: str = "grid") -> tuple[np.ndarray, float, float]:
    """Shrinkage toward ``mean(var) * I`` giving a well-posed correlation matrix.

    ``grid`` takes the smallest weight on the fixed grid with
    ``lambda_min(corr) >= MIN_CORR_EIGENVALUE``. ``ledoit_wolf`` starts from
    the Ledoit-Wolf weight and only moves up the grid if that floor is missed.
    Returns ``(sigma, gamma, lambda_min_of_correlation)``.
    """
    if method not in SHRINKAGE_METHODS:
        raise KnockoffError(f"unknown shrinkage {method!r}; use one of {SHRINKAGE_METHODS}")
    emp = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    p = emp.shape[0]
    target = np.mean(np.diag(emp))
    grid = SHRINKAGE_GRID
    if method == "ledoit_wolf":
        lw = ledoit_wolf_intensity(x)
        grid = (lw,) + tuple(g for g in SHRINKAGE_GRID if g > lw)
    for gamma in grid:
        sigma = (1 - gamma) * emp + gamma * target * np.eye(p)
        sd = np.sqrt(np.diag(sigma))
        if np.any(sd == 0):
            continue
        corr = sigma / np.outer(sd, sd)
        lam = float(np.linalg.eigvalsh(corr)[0])
        if lam >= MIN_CORR_EIGENVALUE:
            return sigma, float(gamma), lam
    raise KnockoffError("covariance not positive definite after maximal shrinkage")


def equicorrelated_s(sigma: np.ndarray) -> np.ndarray:
    """``min(2 * lambda_min(corr), 1)`` on the correlation scale, times the variances."""
    sd = np.sqrt(np.diag(sigma))
    corr = sigma / np.outer(sd, sd)
    lam = float(np.linalg.eigvalsh(corr)[0])
    return min(2 * lam, 1.0) * np.diag(sigma)


def fit_gaussian_knockoffs(x: np.ndarray, shrinkage: str = "grid") -> GaussianKnockoffModel:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise KnockoffError("need at least one feature")
    if x.shape[0] < 2:
        raise KnockoffError("need at least 2 rows to estimate a covariance")
    sigma, gamma, _ = shrunk_covariance(x, shrinkage)
    return GaussianKnockoffModel.from_params(x.mean(axis=0), sigma, equicorrelated_s(sigma), gamma)


def sample_knockoffs(model: GaussianKnockoffModel, x: np.ndarray, rng: RngStream) -> np.ndarray:
    """One knockoff row per row of ``x``; a pure function of (model, x, rng)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.p:
        raise DataError(f"x has shape {x.shape}, model expects {model.p} columns")
    centered = x - model.mu
    noise = rng.gen.standard_normal(x.shape) @ model.cond_cov_chol.T
    return model.mu + centered @ model.cond_coef + noise


def substitute(z: Dataset, x_tilde: np.ndarray, subset: FeatureSubset | Sequence[int]) -> Dataset:
    """Copy of ``z`` with the columns in ``subset`` taken from ``x_tilde``."""
    x_tilde = np.asarray(x_tilde)
    if x_tilde.shape != z.x.shape:
        raise DataError(f"knockoff matrix shape {x_tilde.shape} != data shape {z.x.shape}")
    cols = list(as_subset(subset, z.p).indices)
    x = z.x.copy()
    x[:, cols] = x_tilde[:, cols]
    return z.with_x(x)


def knockoff_names(names: Sequence[str]) -> list[str]:
    return [f"{n}_ko" for n in names]


__all__ = [
    "GaussianKnockoffModel",
    "KnockoffError",
    "SHRINKAGE_METHODS",
    "equicorrelated_s",
    "fit_gaussian_knockoffs",
    "knockoff_names",
    "ledoit_wolf_intensity",
    "sample_knockoffs",
    "shrunk_covariance",
    "substitute",
]
