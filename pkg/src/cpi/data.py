"""Datasets, CSV ingestion, seeded random streams and Gaussian sampling."""
from __future__ import annotations

import csv
import enum
import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_U64 = (1 << 64) - 1


class Task(str, enum.Enum):
    REGRESSION = "regression"
    BINARY_CLASSIFICATION = "binary_classification"

    @classmethod
    def parse(cls, value: "str | Task") -> "Task":
        if isinstance(value, Task):
            return value
        aliases = {"regr": cls.REGRESSION, "classif": cls.BINARY_CLASSIFICATION,
                   "classification": cls.BINARY_CLASSIFICATION,
                   "binary": cls.BINARY_CLASSIFICATION}
        try:
            return cls(value)
        except ValueError:
            if value in aliases:
                return aliases[value]
            raise ValueError(
                f"unknown task {value!r}; expected one of "
                f"{[t.value for t in cls]}") from None


class DataError(ValueError):
    """Invalid input data (parse failures, bad labels, shape mismatches)."""


class ConstantColumnError(DataError):
    def __init__(self, column: str):
        super().__init__(f"column {column!r} is constant (sd = 0)")
        self.column = column


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``x`` (n, p), response ``y`` (n,) and task kind.

    Arrays are copied and made read-only on construction.
    """

    x: np.ndarray
    y: np.ndarray
    task: Task = Task.REGRESSION
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        x = _frozen(self.x)
        if x.ndim != 2:
            raise DataError(f"x must be 2-D, got shape {x.shape}")
        y = _frozen(np.ravel(self.y))
        if y.shape[0] != x.shape[0]:
            raise DataError(f"y has {y.shape[0]} entries but x has {x.shape[0]} rows")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError(f"{len(names)} feature names for {x.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        task = Task.parse(self.task)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("x and y must be finite")
        if task is Task.BINARY_CLASSIFICATION and not np.all((y == 0) | (y == 1)):
            bad = y[(y != 0) & (y != 1)][0]
            raise DataError(f"binary classification labels must be 0/1, found {bad:g}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "task", task)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def with_x(self, x: np.ndarray) -> "Dataset":
        return Dataset(x, self.y, self.task, self.feature_names)

    def rows(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx], self.task, self.feature_names)


@dataclass(frozen=True)
class FeatureSubset:
    """Sorted, duplicate-free column indices of the features under test."""

    indices: tuple[int, ...]
    p: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise DataError("feature subset must be non-empty")
        if len(set(idx)) != len(idx):
            raise DataError(f"duplicate indices in feature subset {idx}")
        bad = [i for i in idx if i < 0 or i >= self.p]
        if bad:
            raise DataError(f"feature indices {bad} out of range for p = {self.p}")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    @property
    def complement(self) -> tuple[int, ...]:
        chosen = set(self.indices)
        return tuple(j for j in range(self.p) if j not in chosen)

    def label(self, names: Sequence[str]) -> str:
        return "+".join(names[j] for j in self.indices)


class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Backed by numpy's PCG64 seeded through ``SeedSequence`` with the stream
    id as spawn key, so distinct ids give independent streams and the same
    key reproduces the same draws on every platform. ``child(key)`` derives
    a deterministic sub-stream without consuming from this one.
    """

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple[int, ...] = ()):
        self.seed = int(seed) & _U64
        self.stream_id = int(stream_id) & _U64
        self._path = tuple(_path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self._path))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, key: int | str) -> "RngStream":
        if isinstance(key, str):
            key = zlib.crc32(key.encode("utf-8"))
        return RngStream(self.seed, self.stream_id, (*self._path, int(key) & _U64))

    def uint64(self) -> int:
        return int(self.gen.integers(0, 1 << 64, dtype=np.uint64))

    def __repr__(self) -> str:
        path = "".join(f"/{k}" for k in self._path)
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}{path})"


def read_numeric_csv(path: str | Path) -> tuple[tuple[str, ...], np.ndarray]:
    """Header names and the numeric body of a CSV file.

    Row numbers in error messages are file line numbers (header = 1).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such data file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(record)} fields, expected {len(header)}")
            vals = []
            for name, cell in zip(header, record):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: cannot parse {cell!r} at row {lineno}, column {name!r}") from None
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: non-finite value {cell!r} at row {lineno}, column {name!r}")
                vals.append(v)
            rows.append(vals)
    return tuple(header), np.array(rows, dtype=np.float64).reshape(len(rows), len(header))


def load_csv(path: str | Path, target: str, task: Task | str = Task.REGRESSION) -> Dataset:
    """Read a numeric CSV with a header row; ``target`` becomes ``y``."""
    task = Task.parse(task)
    header, data = read_numeric_csv(path)
    if target not in header:
        raise DataError(f"target column {target!r} not found; columns are {list(header)}")
    t = header.index(target)
    keep = [j for j in range(len(header)) if j != t]
    y = data[:, t]
    if task is Task.BINARY_CLASSIFICATION and not np.all((y == 0) | (y == 1)):
        bad = y[(y != 0) & (y != 1)][0]
        raise DataError(f"{path}: classification target {target!r} must be 0/1, found {bad:g}")
    return Dataset(data[:, keep], y, task, tuple(header[j] for j in keep))


def write_csv(path: str | Path, x: np.ndarray, names: Sequence[str],
              y: np.ndarray | None = None, target: str | None = None) -> None:
    """Write a numeric matrix (plus optional target column) as CSV.

    Values are written with ``repr`` so a later ``load_csv`` is exact.
    """
    x = np.asarray(x, dtype=np.float64)
    header = list(names)
    if y is not None:
        header.append(target or "y")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(x.shape[0]):
            row = [repr(float(v)) for v in x[i]]
            if y is not None:
                row.append(repr(float(y[i])))
            w.writerow(row)


def standardize(x: np.ndarray, names: Sequence[str] | None = None):
    """Center and scale columns to mean 0, sample sd 1 (n - 1 denominator).

    Returns ``(z, means, sds)``. Raises ``ConstantColumnError`` naming the
    first constant column.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        raise DataError("standardize needs at least 2 rows")
    means = x.mean(axis=0)
    sds = x.std(axis=0, ddof=1)
    const = np.nonzero(sds == 0)[0]
    if const.size:
        j = int(const[0])
        raise ConstantColumnError(names[j] if names is not None else f"column {j}")
    return (x - means) / sds, means, sds


def mvn_sample(rng: RngStream, mu: np.ndarray, sigma_chol: np.ndarray, n: int) -> np.ndarray:
    """Draw ``n`` rows from N(mu, L L^T) given the lower Cholesky factor L."""
    mu = np.asarray(mu, dtype=np.float64)
    L = np.asarray(sigma_chol, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] != mu.shape[0]:
        raise DataError(f"mu has length {mu.shape[0]} but sigma_chol has shape {L.shape}")
    z = rng.gen.standard_normal((n, mu.shape[0]))
    return mu + z @ L.T


def ar1_cov(p: int, rho: float) -> np.ndarray:
    """Toeplitz covariance ``rho ** |i - j|``."""
    i = np.arange(p)
    return rho ** np.abs(i[:, None] - i[None, :]).astype(float)


def as_subset(indices: Iterable[int] | FeatureSubset, p: int) -> FeatureSubset:
    if isinstance(indices, FeatureSubset):
        return indices
    if isinstance(indices, (int, np.integer)):
        indices = (int(indices),)
    return FeatureSubset(tuple(indices), p)


__all__ = [
    "ConstantColumnError",
    "DataError",
    "Dataset",
    "FeatureSubset",
    "RngStream",
    "Task",
    "ar1_cov",
    "as_subset",
    "load_csv",
    "mvn_sample",
    "read_numeric_csv",
    "standardize",
    "write_csv",
]
