"""Tests and intervals on loss differences, multiplicity adjustments, the
knockoff filter and the leave-covariates-out baseline.

All tests are one-sided: the alternative is that the original features
predict better than their knockoffs (positive mean loss difference).
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import special

from . import _kernels
from .data import Dataset, FeatureSubset, RngStream, as_subset
from .learners import Lasso, fit_lasso, lambda_grid, lasso_cv, make_learner, pointwise_loss
from .learners.losses import Loss
from .resampling import RiskEstimator, make_splits
from .results import CpiTestResult, DeltaVector, as_delta_values


class InferenceError(ValueError):
    pass


def t_cdf(x: float, df: float) -> float:
    return float(special.stdtr(df, x))


def t_quantile(q: float, df: float) -> float:
    """Inverse t CDF, polished by one Newton step on ``stdtr``."""
    x = float(special.stdtrit(df, q))
    if math.isfinite(x):
        logpdf = (special.gammaln((df + 1) / 2) - special.gammaln(df / 2)
                  - 0.5 * math.log(df * math.pi) - (df + 1) / 2 * math.log1p(x * x / df))
        x -= (float(special.stdtr(df, x)) - q) / math.exp(logpdf)
    return x


# ------------------------------------------------------------------ t-test

def t_test_cpi(d: DeltaVector | Sequence[float], alpha: float = 0.05) -> CpiTestResult:
    """Paired one-sided t-test of mean(delta) > 0 with a lower confidence bound.

    Zero-variance deltas (all equal to c) give se = 0, p = 0 if c > 0 and
    p = 1 otherwise, and carry a warning.
    """
    v = as_delta_values(d)
    n = v.shape[0]
    if n < 2:
        raise InferenceError("t-test needs at least 2 loss differences")
    _check_alpha(alpha)
    cpi = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(n))
    if np.all(v == v[0]) or se == 0:
        c = cpi
        stat = math.copysign(math.inf, c) if c != 0 else 0.0
        return CpiTestResult(c, 0.0, stat, 0.0 if c > 0 else 1.0, c, alpha, "t", n,
                             warning="zero variance in loss differences")
    stat = cpi / se
    df = n - 1
    p = float(special.stdtr(df, -stat))
    ci = cpi - se * t_quantile(1 - alpha, df)
    return CpiTestResult(cpi, se, stat, p, ci, alpha, "t", n)


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise InferenceError("alpha must lie in (0, 1)")


# ------------------------------------------------------------------ Fisher

@dataclass(frozen=True)
class FisherConfig:
    """``mode`` is ``"exact"``, ``"monte_carlo"`` or ``"auto"`` (exact when
    n <= exact_limit)."""

    mode: str = "auto"
    n_draws: int = 10_000
    exact_limit: int = 20

    def __post_init__(self):
        if self.mode not in ("exact", "monte_carlo", "auto"):
            raise InferenceError(f"unknown Fisher mode {self.mode!r}")
        if self.n_draws < 1:
            raise InferenceError("need at least one Monte Carlo draw")
        if self.exact_limit < 1:
            raise InferenceError("exact_limit must be positive")


def _tie_tol(v: np.ndarray) -> float:
    return 1e-10 * float(np.sum(np.abs(v)))


def all_subset_sums(v: np.ndarray) -> np.ndarray:
    """Sum of every one of the 2^n subsets of ``v`` (empty subset first)."""
    v = np.asarray(v, dtype=np.float64)
    h = v.shape[0] // 2

    def enum(part):
        sums = np.zeros(1)
        for x in part:
            sums = np.concatenate([sums, sums + x])
        return sums

    return (enum(v[h:])[:, None] + enum(v[:h])[None, :]).ravel()


def exact_nonpositive_count(v: np.ndarray) -> int:
    """Number of subsets of ``v`` whose sum is <= 0, in exact arithmetic.

    Floats are dyadic rationals, so scaling by the largest denominator turns
    them into Python integers; the two half-enumerations are then merged by
    binary search.
    """
    fr = [Fraction(float(x)) for x in v]
    scale = max((f.denominator for f in fr), default=1)
    ints = [int(f * scale) for f in fr]
    h = len(ints) // 2

    def enum(part):
        sums = [0]
        for x in part:
            sums += [s + x for s in sums]
        return sums

    right = sorted(enum(ints[h:]))
    return sum(bisect.bisect_right(right, -a) for a in enum(ints[:h]))


def _critical_cpi(null: np.ndarray, alpha: float) -> float:
    """Smallest null value c with #{null >= c} / N <= alpha (inf if none)."""
    srt = np.sort(null)
    uniq = np.unique(srt)
    counts = srt.shape[0] - np.searchsorted(srt, uniq, side="left")
    ok = counts <= alpha * srt.shape[0] * (1 + 1e-12)
    return float(uniq[ok][0]) if ok.any() else math.inf


def fisher_exact_cpi(d: DeltaVector | Sequence[float], cfg: FisherConfig = FisherConfig(),
                     rng: RngStream | None = None, alpha: float = 0.05) -> CpiTestResult:
    """Paired randomization (sign-flip) test of mean(delta).

    Exchanging a unit's original and knockoff loss flips the sign of its
    delta, so the null CPI for flip set F is ``(sum(d) - 2 sum_F d) / n``
    and it reaches the observed CPI exactly when ``sum_F d <= 0``.
    Exact mode counts all 2^n flip sets in exact arithmetic; Monte Carlo
    mode draws ``n_draws`` of them, treats sums within ``1e-10 * sum|d|``
    of zero as ties and reports ``(hits + 1) / (draws + 1)``.
    """
    v = as_delta_values(d)
    n = v.shape[0]
    if n < 1:
        raise InferenceError("Fisher test needs at least one loss difference")
    _check_alpha(alpha)
    mode = cfg.mode
    if mode == "auto":
        mode = "exact" if n <= cfg.exact_limit else "monte_carlo"
    if mode == "exact" and n > cfg.exact_limit:
        raise InferenceError(f"exact enumeration of 2^{n} assignments exceeds exact_limit = {cfg.exact_limit}")
    total = float(v.sum())
    if mode == "exact":
        sums = all_subset_sums(v)
        p = exact_nonpositive_count(v) / sums.shape[0]
    else:
        rng = rng if rng is not None else RngStream(0)
        sums = _kernels.signflip_subset_sums(np.ascontiguousarray(v), cfg.n_draws, rng.uint64())
        p = (np.count_nonzero(sums <= _tie_tol(v)) + 1.0) / (cfg.n_draws + 1.0)
    null = (total - 2 * sums) / n
    cpi = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    ci = cpi - _critical_cpi(null, alpha)
    return CpiTestResult(cpi, se, cpi, float(p), ci, alpha, "fisher", n)


# ------------------------------------------------------------------ WLS

def wls_design(loss_orig, loss_ko) -> tuple[np.ndarray, np.ndarray]:
    """The 2n x (n + 1) design (unit indicators, then the knockoff indicator D)
    and the stacked response (original losses, then knockoff losses)."""
    lo = np.asarray(loss_orig, dtype=np.float64)
    lk = np.asarray(loss_ko, dtype=np.float64)
    n = lo.shape[0]
    units = np.vstack([np.eye(n), np.eye(n)])
    dtype = np.concatenate([np.zeros(n), np.ones(n)])
    return np.column_stack([units, dtype]), np.concatenate([lo, lk])


def wls_test_cpi(loss_orig, loss_ko, weights=None, alpha: float = 0.05) -> CpiTestResult:
    """Heteroskedastic paired test: weighted least squares of the stacked
    losses on unit indicators plus the data-type indicator D.

    ``weights`` has length 2n (original rows first). The unit effects are
    eliminated from the weighted normal equations in closed form: with
    ``h_i = w_i w_{n+i} / (w_i + w_{n+i})`` the D coefficient is the
    h-weighted mean of the deltas and its variance is
    ``sigma^2 / sum(h)``, ``sigma^2 = sum h (delta - gamma)^2 / (n - 1)``.
    """
    lo = np.asarray(loss_orig, dtype=np.float64).ravel()
    lk = np.asarray(loss_ko, dtype=np.float64).ravel()
    n = lo.shape[0]
    if lk.shape[0] != n:
        raise InferenceError("original and knockoff losses differ in length")
    if n < 2:
        raise InferenceError("WLS test needs at least 2 units (n - 1 residual df)")
    _check_alpha(alpha)
    w = np.ones(2 * n) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    if w.shape[0] != 2 * n:
        raise InferenceError(f"expected {2 * n} weights, got {w.shape[0]}")
    if not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise InferenceError("weights must be positive and finite")
    u, k = w[:n], w[n:]
    h = u * k / (u + k)
    delta = lk - lo
    gamma = float(np.sum(h * delta) / np.sum(h))
    resid = delta - gamma
    df = n - 1
    sigma2 = float(np.sum(h * resid ** 2) / df)
    se = math.sqrt(sigma2 / float(np.sum(h)))
    if np.all(delta == delta[0]) or se == 0:
        stat = math.copysign(math.inf, gamma) if gamma != 0 else 0.0
        return CpiTestResult(gamma, 0.0, stat, 0.0 if gamma > 0 else 1.0, gamma, alpha,
                             "wls", n, warning="zero residual variance")
    stat = gamma / se
    p = float(special.stdtr(df, -stat))
    ci = gamma - se * t_quantile(1 - alpha, df)
    return CpiTestResult(gamma, se, stat, p, ci, alpha, "wls", n)


# ------------------------------------------------------------------ power

def power_t(delta_effect: float, n: int, alpha: float = 0.05) -> float:
    """``1 - F_{n-1}(t* - delta)`` with ``t* = F_{n-1}^{-1}(1 - alpha)``.

    ``delta_effect`` is on the t scale (standardized mean times sqrt(n)).
    """
    if n < 2:
        raise InferenceError("power needs n >= 2")
    _check_alpha(alpha)
    df = n - 1
    t_star = t_quantile(1 - alpha, df)
    return float(special.stdtr(df, delta_effect - t_star))


# ------------------------------------------------------------------ multiplicity

def holm_adjust(p: Sequence[float]) -> np.ndarray:
    p = _check_p(p)
    m = p.shape[0]
    order = np.argsort(p, kind="stable")
    adj = np.maximum.accumulate(np.minimum((m - np.arange(m)) * p[order], 1.0))
    out = np.empty(m)
    out[order] = adj
    return out


def bh_adjust(p: Sequence[float]) -> np.ndarray:
    p = _check_p(p)
    m = p.shape[0]
    order = np.argsort(p, kind="stable")
    raw = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum(np.minimum.accumulate(raw[::-1])[::-1], 1.0)
    out = np.empty(m)
    out[order] = adj
    return out


def adjust(p: Sequence[float], method: str) -> np.ndarray:
    if method == "none":
        return _check_p(p).copy()
    if method == "holm":
        return holm_adjust(p)
    if method in ("bh", "fdr"):
        return bh_adjust(p)
    raise InferenceError(f"unknown adjustment {method!r}; use none, holm or bh")


def _check_p(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size == 0:
        raise InferenceError("no p-values to adjust")
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise InferenceError("p-values must lie in [0, 1]")
    return p


# ------------------------------------------------------------------ knockoff filter

def lasso_w_stats(z: Dataset, x_tilde: np.ndarray, lam: float | None = None,
                  rng: RngStream | None = None, cv_folds: int = 10) -> np.ndarray:
    """``|b_j| - |b_{j+p}|`` from a lasso on the standardized ``[X, X_tilde]``.

    Without ``lam`` the penalty is tuned by ``cv_folds``-fold CV.
    """
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    if x_tilde.shape != z.x.shape:
        raise InferenceError(f"knockoff shape {x_tilde.shape} != data shape {z.x.shape}")
    aug = np.hstack([z.x, x_tilde])
    if lam is None:
        model, _ = lasso_cv(Lasso(cv_folds=cv_folds), aug, z.y, rng)
    else:
        if lam < 0:
            raise InferenceError("lambda must be nonnegative")
        grid = lambda_grid(aug, z.y)
        model = fit_lasso(aug, z.y, lam, lambdas=grid)
    b = np.abs(model.coef)
    return b[: z.p] - b[z.p:]


@dataclass(frozen=True)
class KnockoffFilterResult:
    w: np.ndarray
    threshold: float
    selected: tuple[int, ...]
    q: float


def knockoff_filter_att(w: Sequence[float], q: float = 0.1, offset: int = 1) -> KnockoffFilterResult:
    """Adaptive thresholding (knockoff+ when ``offset = 1``)."""
    w = np.asarray(w, dtype=np.float64).ravel()
    if not 0 < q < 1:
        raise InferenceError("target FDR q must lie in (0, 1)")
    threshold = math.inf
    for t in np.unique(np.abs(w[w != 0])):
        ratio = (offset + np.count_nonzero(w <= -t)) / max(np.count_nonzero(w >= t), 1)
        if ratio <= q:
            threshold = float(t)
            break
    selected = tuple(int(j) for j in np.nonzero(w >= threshold)[0])
    return KnockoffFilterResult(w, threshold, selected, q)


# ------------------------------------------------------------------ LOCO

def loco(z: Dataset, subset: FeatureSubset | Sequence[int], learner, loss: Loss | str,
         risk: RiskEstimator, rng: RngStream, alpha: float = 0.05) -> CpiTestResult:
    """Refit without the subset on every split; delta = reduced loss - full loss."""
    d = loco_deltas(z, subset, learner, loss, risk, rng)
    res = t_test_cpi(d, alpha)
    return replace(res, method="loco-t")


def loco_deltas(z, subset, learner, loss, risk, rng) -> DeltaVector:
    subset = as_subset(subset, z.p)
    learner = make_learner(learner)
    keep = list(subset.complement)
    if not keep:
        raise InferenceError("removing the subset leaves no features")
    splits = make_splits(risk, z.n, rng.child("splits"))
    fit_rng = rng.child("fit")
    parts = []
    for k, (train, test) in enumerate(splits):
        full = learner.fit(z.x[train], z.y[train], z.task, fit_rng.child(2 * k))
        red = learner.fit(z.x[train][:, keep], z.y[train], z.task, fit_rng.child(2 * k + 1))
        lf = pointwise_loss(loss, z.y[test], full.predict(z.x[test]))
        lr = pointwise_loss(loss, z.y[test], red.predict(z.x[test][:, keep]))
        parts.append((lf, lr, test, np.full(test.shape[0], k)))
    return DeltaVector.from_losses(*(np.concatenate(c) for c in zip(*parts)))


__all__ = [
    "FisherConfig",
    "InferenceError",
    "KnockoffFilterResult",
    "adjust",
    "all_subset_sums",
    "bh_adjust",
    "fisher_exact_cpi",
    "holm_adjust",
    "knockoff_filter_att",
    "lasso_w_stats",
    "loco",
    "loco_deltas",
    "power_t",
    "t_cdf",
    "t_quantile",
    "t_test_cpi",
    "wls_design",
    "wls_test_cpi",
]
