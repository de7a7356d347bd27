"""Per-sample loss functions."""
from __future__ import annotations

import enum

import numpy as np

from ..data import Task

PROB_EPS = 1e-12


class Loss(str, enum.Enum):
    MSE = "mse"
    MAE = "mae"
    CE = "ce"
    MMCE = "mmce"

    @classmethod
    def parse(cls, value: "str | Loss") -> "Loss":
        if isinstance(value, Loss):
            return value
        aliases = {"cross_entropy": cls.CE, "logloss": cls.CE, "misclassification": cls.MMCE}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(
                f"unknown loss {value!r}; valid identifiers: {[l.value for l in cls]}") from None

    @property
    def classification_only(self) -> bool:
        return self in (Loss.CE, Loss.MMCE)

    def compatible_with(self, task: Task) -> bool:
        return task is Task.BINARY_CLASSIFICATION or not self.classification_only


def pointwise_loss(loss: Loss | str, y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    """Vector of per-sample losses. Classification predictions are P(y = 1)."""
    loss = Loss.parse(loss)
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if loss is Loss.MSE:
        return (y - y_hat) ** 2
    if loss is Loss.MAE:
        return np.abs(y - y_hat)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError(f"{loss.value} loss needs 0/1 labels")
    if loss is Loss.CE:
        p = np.clip(y_hat, PROB_EPS, 1 - PROB_EPS)
        return -(y * np.log(p) + (1 - y) * np.log1p(-p))
    # ties at exactly 0.5 predict class 1
    return ((y_hat >= 0.5).astype(np.float64) != y).astype(np.float64)


def loss(l: Loss | str, y: float, y_hat: float) -> float:
    return float(pointwise_loss(l, np.array([y]), np.array([y_hat]))[0])
