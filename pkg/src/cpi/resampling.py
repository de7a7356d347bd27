"""Train/test split schemes used to obtain out-of-sample losses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .data import RngStream


class ResamplingError(ValueError):
    pass


@dataclass(frozen=True)
class Holdout:
    test_fraction: float = 1 / 3

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ResamplingError("test_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class KFold:
    k: int = 10

    def __post_init__(self):
        if self.k < 2:
            raise ResamplingError("k-fold needs k >= 2")


@dataclass(frozen=True)
class Subsample:
    iterations: int = 5
    test_fraction: float = 1 / 3

    def __post_init__(self):
        if self.iterations < 1:
            raise ResamplingError("subsampling needs at least one iteration")
        if not 0 < self.test_fraction < 1:
            raise ResamplingError("test_fraction must lie in (0, 1)")


RiskEstimator = Holdout | KFold | Subsample


def parse_risk(text: "str | RiskEstimator") -> RiskEstimator:
    """``holdout:0.33``, ``kfold:10`` or ``subsample:5:0.25``; fractions may
    be written as ratios (``holdout:1/3``)."""
    if isinstance(text, (Holdout, KFold, Subsample)):
        return text
    kind, *args = str(text).split(":")
    try:
        if kind == "holdout":
            return Holdout(*(float(Fraction(a)) for a in args))
        if kind in ("kfold", "cv"):
            return KFold(*(int(a) for a in args))
        if kind == "subsample":
            it = [int(args[0])] if args else []
            return Subsample(*it, *(float(Fraction(a)) for a in args[1:]))
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ResamplingError(f"bad resampling spec {text!r}: {exc}") from None
    raise ResamplingError(
        f"unknown resampling {text!r}; use holdout:F, kfold:K or subsample:B:F")


def risk_to_str(risk: RiskEstimator) -> str:
    if isinstance(risk, Holdout):
        return f"holdout:{risk.test_fraction!r}"
    if isinstance(risk, KFold):
        return f"kfold:{risk.k}"
    return f"subsample:{risk.iterations}:{risk.test_fraction!r}"


def _test_size(frac: float, n: int) -> int:
    return int(math.floor(frac * n + 1e-9))


def make_splits(risk: RiskEstimator, n: int, rng: RngStream) -> list[tuple[np.ndarray, np.ndarray]]:
    """List of ``(train_ids, test_ids)``, each sorted, disjoint and non-empty."""
    risk = parse_risk(risk)
    if n < 2:
        raise ResamplingError("need at least 2 rows to split")
    all_ids = np.arange(n)
    if isinstance(risk, KFold):
        if risk.k > n:
            raise ResamplingError(f"k = {risk.k} folds for only {n} rows")
        perm = rng.gen.permutation(n)
        tests = [np.sort(f) for f in np.array_split(perm, risk.k)]
    else:
        m = _test_size(risk.test_fraction, n)
        if m < 1 or m >= n:
            raise ResamplingError(
                f"test fraction {risk.test_fraction!r} of n = {n} leaves an empty train or test set")
        reps = 1 if isinstance(risk, Holdout) else risk.iterations
        tests = [np.sort(rng.gen.permutation(n)[:m]) for _ in range(reps)]
    return [(np.setdiff1d(all_ids, t, assume_unique=True), t) for t in tests]
