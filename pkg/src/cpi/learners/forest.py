"""Random forest of CART trees grown by the compiled kernel.

Bootstrap rows per tree, ``mtry`` candidate features per node, variance
reduction for regression and Gini for 0/1 classification (the two coincide
for 0/1 targets). Classification forests return the fraction of trees
voting for class 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .. import _kernels
from ..data import RngStream, Task
from .base import FittedModel, LearnerError, check_predict_input


@dataclass(frozen=True)
class ForestModel(FittedModel):
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    p: int
    task: Task = Task.REGRESSION

    @property
    def n_trees(self) -> int:
        return self.roots.shape[0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(check_predict_input(x, self.p))
        return _kernels.predict_forest(x, self.feature, self.threshold, self.left,
                                       self.right, self.value, self.roots,
                                       self.task is Task.BINARY_CLASSIFICATION)


@dataclass(frozen=True)
class RandomForest:
    n_trees: int = 500
    mtry: int | None = None
    min_node: int = 5
    max_depth: int | None = None
    name: ClassVar[str] = "rf"

    def __post_init__(self):
        if self.n_trees < 1 or self.min_node < 1:
            raise LearnerError("n_trees and min_node must be positive")
        if self.mtry is not None and self.mtry < 1:
            raise LearnerError("mtry must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise LearnerError("max_depth must be positive")

    def resolve_mtry(self, p: int, task: Task) -> int:
        if self.mtry is not None:
            return min(self.mtry, p)
        if task is Task.BINARY_CLASSIFICATION:
            return max(1, math.ceil(math.sqrt(p)))
        return max(1, math.ceil(p / 3))

    def fit(self, x, y, task=Task.REGRESSION, rng: RngStream | None = None) -> ForestModel:
        task = Task.parse(task)
        x = np.asfortranarray(x, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        n, p = x.shape
        if n < 1 or p < 1:
            raise LearnerError("random forest needs at least one row and one feature")
        rng = rng if rng is not None else RngStream(0)
        mtry = self.resolve_mtry(p, task)
        depth = -1 if self.max_depth is None else self.max_depth
        parts = []
        for _ in range(self.n_trees):
            sample = rng.gen.integers(0, n, size=n).astype(np.int64)
            parts.append(_kernels.build_tree(x, y, sample, mtry, self.min_node, depth, rng.uint64()))
        sizes = np.array([len(t[0]) for t in parts])
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

        def cat(i, shift=False):
            arrs = [t[i] for t in parts]
            if shift:
                arrs = [np.where(a >= 0, a + off, a) for a, off in zip(arrs, offsets)]
            return np.ascontiguousarray(np.concatenate(arrs))

        return ForestModel(cat(0), cat(1), cat(2, True), cat(3, True), cat(4),
                           offsets, p, task)
