"""Result containers shared by the engine and the inference routines."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class DeltaVector:
    """Out-of-sample loss differences (knockoff minus original), one entry
    per evaluation, with the row and split that produced each entry."""

    values: np.ndarray
    sample_ids: np.ndarray
    split_ids: np.ndarray
    loss_orig: np.ndarray
    loss_ko: np.ndarray

    @classmethod
    def from_losses(cls, loss_orig, loss_ko, sample_ids=None, split_ids=None) -> "DeltaVector":
        lo = np.asarray(loss_orig, dtype=np.float64)
        lk = np.asarray(loss_ko, dtype=np.float64)
        if lo.shape != lk.shape or lo.ndim != 1:
            raise ValueError("original and knockoff losses must be 1-D and equal length")
        n = lo.shape[0]
        sid = np.arange(n) if sample_ids is None else np.asarray(sample_ids)
        spl = np.zeros(n, dtype=np.int64) if split_ids is None else np.asarray(split_ids)
        return cls(lk - lo, sid, spl, lo, lk)

    @classmethod
    def from_values(cls, values) -> "DeltaVector":
        v = np.asarray(values, dtype=np.float64)
        return cls.from_losses(np.zeros_like(v), v)

    def __len__(self) -> int:
        return self.values.shape[0]


def as_delta_values(d) -> np.ndarray:
    v = d.values if isinstance(d, DeltaVector) else d
    v = np.asarray(v, dtype=np.float64).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("delta values must be finite")
    return v


@dataclass(frozen=True)
class CpiTestResult:
    cpi: float
    se: float
    statistic: float
    p_value: float
    ci_lower: float
    alpha: float
    method: str
    n_eval: int
    warning: str | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, float) and not math.isfinite(v):
                out[k] = None
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())
