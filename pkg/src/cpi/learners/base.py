from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from ..data import Task


class LearnerError(ValueError):
    pass


class SingularDesignError(LearnerError):
    pass


@runtime_checkable
class FittedModel(Protocol):
    task: Task

    def predict(self, x: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class Learner(Protocol):
    """Anything with ``fit(x, y, task, rng) -> FittedModel`` can be plugged in."""

    def fit(self, x: np.ndarray, y: np.ndarray, task: Task, rng=None) -> FittedModel: ...


def require_task(task, learner: str, *allowed: Task) -> None:
    task = Task.parse(task)
    if task not in allowed:
        raise LearnerError(f"learner {learner!r} does not support task {task.value!r}")


def check_predict_input(x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p:
        raise LearnerError(f"expected {p} feature columns, got shape {x.shape}")
    return x
