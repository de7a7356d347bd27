"""Simulation studies: error rates and coverage of CPI tests on AR(1)
Gaussian designs, and FDR/power of CPI + BH against the knockoff filter
on sparse high-dimensional designs.

Replication ``r`` always draws from ``RngStream(seed, r)``, so results do
not depend on execution order or thread count.
"""
from __future__ import annotations

import enum
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import expit, ndtri

from .data import Dataset, RngStream, Task, ar1_cov, mvn_sample
from .engine import run_cpi_many, shrinkage_sampler
from .inference import FisherConfig, bh_adjust, knockoff_filter_att, lasso_w_stats
from .knockoffs import SHRINKAGE_METHODS, GaussianKnockoffModel, equicorrelated_s, sample_knockoffs
from .learners import make_learner, pointwise_loss
from .learners.losses import Loss
from .resampling import make_splits, parse_risk, risk_to_str

IQR_LOW, IQR_HIGH = float(ndtri(0.25)), float(ndtri(0.75))
REFERENCE_STREAM = 2 ** 63


class ConfigError(ValueError):
    pass


class Response(str, enum.Enum):
    LINEAR = "linear"
    NONLINEAR = "nonlinear"
    BINARY_LINEAR = "binary_linear"
    BINARY_NONLINEAR = "binary_nonlinear"

    @property
    def task(self) -> Task:
        return Task.BINARY_CLASSIFICATION if self.value.startswith("binary") else Task.REGRESSION


@dataclass(frozen=True)
class SimDesign:
    n: int = 1000
    p: int = 10
    rho: float = 0.5
    beta: tuple[float, ...] = tuple(j / 10 for j in range(10))
    response: Response = Response.LINEAR
    noise_sd: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        try:
            object.__setattr__(self, "response", Response(self.response))
        except ValueError:
            raise ConfigError(f"unknown response {self.response!r}; use "
                              f"{[r.value for r in Response]}") from None
        if self.n < 2 or self.p < 1:
            raise ConfigError("design needs n >= 2 and p >= 1")
        if len(self.beta) != self.p:
            raise ConfigError(f"beta has {len(self.beta)} entries for p = {self.p}")
        if not 0 <= self.rho < 1:
            raise ConfigError("rho must lie in [0, 1)")
        if not self.noise_sd > 0:
            raise ConfigError("noise_sd must be positive")

    @property
    def sigma(self) -> np.ndarray:
        return ar1_cov(self.p, self.rho)


def interquartile_sign(x: np.ndarray) -> np.ndarray:
    """+1 inside the standard normal interquartile band, -1 outside."""
    return np.where((x >= IQR_LOW) & (x <= IQR_HIGH), 1.0, -1.0)


def gen_response(design: SimDesign, x: np.ndarray, rng: RngStream) -> np.ndarray:
    beta = np.array(design.beta)
    feats = x if design.response in (Response.LINEAR, Response.BINARY_LINEAR) else interquartile_sign(x)
    eta = feats @ beta
    if design.response.task is Task.BINARY_CLASSIFICATION:
        return (rng.gen.random(x.shape[0]) < expit(eta)).astype(np.float64)
    return eta + design.noise_sd * rng.gen.standard_normal(x.shape[0])


def gen_dataset(design: SimDesign, rng: RngStream, n: int | None = None) -> Dataset:
    n = design.n if n is None else n
    chol = np.linalg.cholesky(design.sigma)
    x = mvn_sample(rng.child("x"), np.zeros(design.p), chol, n)
    y = gen_response(design, x, rng.child("y"))
    return Dataset(x, y, design.response.task)


def _map(fn: Callable[[int], Any], n: int, threads: int) -> list:
    if threads <= 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def default_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


# ------------------------------------------------------------------ error study

@dataclass(frozen=True)
class ExperimentConfig:
    design: SimDesign = field(default_factory=SimDesign)
    learner: Any = "ols"
    loss: str = "mse"
    resampling: str = "holdout:1/3"
    inference: str = "t"
    alpha: float = 0.05
    replications: int = 500
    seed: int = 42
    fisher_draws: int = 10_000
    reference_n: int = 1_000_000
    reference_fits: int = 10
    true_cpi: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        try:
            make_learner(self.learner)
            Loss.parse(self.loss)
            parse_risk(self.resampling)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.inference not in ("t", "fisher", "wls"):
            raise ConfigError(f"unknown inference {self.inference!r}")
        if self.reference_n < 1 or self.reference_fits < 1:
            raise ConfigError("reference_n and reference_fits must be >= 1")
        if self.true_cpi is not None:
            if len(self.true_cpi) != self.design.p:
                raise ConfigError("true_cpi needs one entry per feature")
            object.__setattr__(self, "true_cpi", tuple(float(c) for c in self.true_cpi))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["study"] = "error"
        d["design"]["response"] = self.design.response.value
        d["resampling"] = risk_to_str(parse_risk(self.resampling))
        return d


@dataclass(frozen=True)
class ErrorStudyResult:
    beta: np.ndarray
    rejection_rate: np.ndarray
    mean_cpi: np.ndarray
    coverage: np.ndarray
    true_cpi: np.ndarray
    p_values: np.ndarray
    cpi: np.ndarray
    ci_lower: np.ndarray
    alpha: float

    @property
    def replications(self) -> int:
        return self.p_values.shape[0]

    def rows(self) -> list[dict]:
        out = []
        for j in range(self.beta.shape[0]):
            for metric, arr in (("rejection_rate", self.rejection_rate),
                                ("mean_cpi", self.mean_cpi), ("coverage", self.coverage)):
                out.append({"feature": f"x{j + 1}", "beta": float(self.beta[j]),
                            "metric": metric, "value": float(arr[j])})
        return out


ERROR_CSV_COLUMNS = ("feature", "beta", "metric", "value")


def reference_cpi(cfg: ExperimentConfig, chunk: int = 100_000) -> np.ndarray:
    """Population CPI per feature, averaged over ``cfg.reference_fits``
    learner fits on design-sized training sets.

    Knockoffs come from the true covariance and the risk of each fit is
    taken over an equal share of ``cfg.reference_n`` fresh rows.
    """
    design = cfg.design
    rng = RngStream(cfg.seed, REFERENCE_STREAM)
    risk = parse_risk(cfg.resampling)
    n_train = len(make_splits(risk, design.n, rng.child("split"))[0][0])
    learner = make_learner(cfg.learner)
    sigma = design.sigma
    ko = GaussianKnockoffModel.from_params(np.zeros(design.p), sigma, equicorrelated_s(sigma))
    loss = Loss.parse(cfg.loss)
    per_fit = max(cfg.reference_n // cfg.reference_fits, 1)
    total = np.zeros(design.p)
    for f in range(cfg.reference_fits):
        frng = rng.child(f)
        train = gen_dataset(design, frng.child("train"), n_train)
        model = learner.fit(train.x, train.y, train.task, frng.child("fit"))
        done = 0
        while done < per_fit:
            m = min(chunk, per_fit - done)
            crng = frng.child("eval").child(done)
            z = gen_dataset(design, crng, m)
            xt = sample_knockoffs(ko, z.x, crng.child("knockoffs"))
            lo = pointwise_loss(loss, z.y, model.predict(z.x))
            for j in range(design.p):
                xs = z.x.copy()
                xs[:, j] = xt[:, j]
                total[j] += np.sum(pointwise_loss(loss, z.y, model.predict(xs)) - lo)
            done += m
    return total / (per_fit * cfg.reference_fits)


def run_error_study(cfg: ExperimentConfig, threads: int = 1,
                    progress: Callable[[int], None] | None = None) -> ErrorStudyResult:
    design = cfg.design
    learner = make_learner(cfg.learner)
    risk = parse_risk(cfg.resampling)
    fisher = FisherConfig(n_draws=cfg.fisher_draws)

    def one(r: int):
        rng = RngStream(cfg.seed, r)
        z = gen_dataset(design, rng.child("data"))
        res = run_cpi_many(z, range(design.p), learner, cfg.loss, risk, cfg.inference,
                           cfg.alpha, rng.child("cpi"), fisher)
        if progress is not None:
            progress(r)
        return ([x.p_value for x in res], [x.cpi for x in res], [x.ci_lower for x in res])

    reps = _map(one, cfg.replications, threads)
    p_values, cpi, ci_lower = (np.array(a) for a in zip(*reps))
    true_cpi = np.array(cfg.true_cpi) if cfg.true_cpi is not None else reference_cpi(cfg)
    return ErrorStudyResult(
        beta=np.array(design.beta),
        rejection_rate=np.mean(p_values <= cfg.alpha, axis=0),
        mean_cpi=cpi.mean(axis=0),
        coverage=np.mean(ci_lower <= true_cpi, axis=0),
        true_cpi=true_cpi,
        p_values=p_values, cpi=cpi, ci_lower=ci_lower, alpha=cfg.alpha)


# ------------------------------------------------------------------ FDR study

@dataclass(frozen=True)
class FdrStudyConfig:
    n: int = 300
    p: int = 1000
    k_nonzero: int = 60
    effects: tuple[float, ...] = (1.0,)
    rhos: tuple[float, ...] = (0.0,)
    q: float = 0.1
    replications: int = 100
    seed: int = 42
    noise_sd: float = 1.0
    learner: Any = field(default_factory=lambda: {"kind": "lasso", "cv_folds": 10})
    resampling: str = "kfold:10"
    att_cv_folds: int = 10
    shrinkage: str = "ledoit_wolf"

    def __post_init__(self):
        object.__setattr__(self, "effects", tuple(float(e) for e in self.effects))
        object.__setattr__(self, "rhos", tuple(float(r) for r in self.rhos))
        if not 0 <= self.k_nonzero <= self.p:
            raise ConfigError("need 0 <= k_nonzero <= p")
        if not 0 < self.q < 1:
            raise ConfigError("q must lie in (0, 1)")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.effects or not self.rhos:
            raise ConfigError("need at least one effect size and one rho")
        if any(not 0 <= r < 1 for r in self.rhos):
            raise ConfigError("rho values must lie in [0, 1)")
        if self.shrinkage not in SHRINKAGE_METHODS:
            raise ConfigError(f"unknown shrinkage {self.shrinkage!r}; use one of {SHRINKAGE_METHODS}")
        try:
            make_learner(self.learner)
            parse_risk(self.resampling)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def cells(self) -> list[tuple[float, float]]:
        return [(e, r) for e in self.effects for r in self.rhos]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["study"] = "fdr"
        d["resampling"] = risk_to_str(parse_risk(self.resampling))
        return d


@dataclass(frozen=True)
class FdrReplication:
    support: tuple[int, ...]
    selected: dict[str, tuple[int, ...]]


def false_discovery_proportion(selected: Sequence[int], support: Sequence[int]) -> float:
    sel = set(selected)
    return len(sel - set(support)) / max(len(sel), 1)


def true_positive_proportion(selected: Sequence[int], support: Sequence[int]) -> float:
    if not support:
        return 0.0
    return len(set(selected) & set(support)) / len(support)


@dataclass(frozen=True)
class FdrStudyResult:
    cells: list[tuple[float, float]]
    replications: dict[int, list[FdrReplication]]
    methods: tuple[str, ...] = ("cpi", "att")

    def metric(self, method: str, cell: int) -> tuple[float, float]:
        reps = self.replications[cell]
        power = float(np.mean([true_positive_proportion(r.selected[method], r.support) for r in reps]))
        fdr = float(np.mean([false_discovery_proportion(r.selected[method], r.support) for r in reps]))
        return power, fdr

    def rows(self) -> list[dict]:
        out = []
        for m in self.methods:
            for c, (effect, rho) in enumerate(self.cells):
                power, fdr = self.metric(m, c)
                out.append({"method": m, "cell": c, "effect": effect, "rho": rho,
                            "power": power, "fdr": fdr})
        return out


FDR_CSV_COLUMNS = ("method", "cell", "effect", "rho", "power", "fdr")


def fdr_replication(cfg: FdrStudyConfig, effect: float, rho: float, rng: RngStream) -> FdrReplication:
    p = cfg.p
    beta = np.zeros(p)
    pos = np.sort(rng.gen.choice(p, size=cfg.k_nonzero, replace=False))
    signs = rng.gen.choice([-1.0, 1.0], size=cfg.k_nonzero)
    beta[pos] = effect * signs
    design = SimDesign(n=cfg.n, p=p, rho=rho, beta=tuple(beta), noise_sd=cfg.noise_sd)
    z = gen_dataset(design, rng.child("data"))
    x_tilde = shrinkage_sampler(cfg.shrinkage)(z.x, rng.child("knockoffs"))

    res = run_cpi_many(z, range(p), cfg.learner, Loss.MSE, cfg.resampling, "t", 0.05,
                       rng.child("cpi"), x_tilde=x_tilde)
    q_cpi = bh_adjust([r.p_value for r in res])
    sel_cpi = tuple(int(j) for j in np.nonzero(q_cpi <= cfg.q)[0])

    w = lasso_w_stats(z, x_tilde, rng=rng.child("att"), cv_folds=cfg.att_cv_folds)
    sel_att = knockoff_filter_att(w, cfg.q).selected
    support = tuple(int(j) for j in np.nonzero(beta)[0])
    return FdrReplication(support, {"cpi": sel_cpi, "att": sel_att})


def run_fdr_study(cfg: FdrStudyConfig, threads: int = 1,
                  progress: Callable[[int], None] | None = None) -> FdrStudyResult:
    reps: dict[int, list[FdrReplication]] = {}
    for c, (effect, rho) in enumerate(cfg.cells):
        def one(r: int, c=c, effect=effect, rho=rho):
            out = fdr_replication(cfg, effect, rho, RngStream(cfg.seed, r).child(c))
            if progress is not None:
                progress(r)
            return out
        reps[c] = _map(one, cfg.replications, threads)
    return FdrStudyResult(cfg.cells, reps)


# ------------------------------------------------------------------ configs

def _design_from(d: dict) -> SimDesign:
    try:
        return SimDesign(**d)
    except TypeError as exc:
        raise ConfigError(f"bad design: {exc}") from None


def config_from_dict(d: dict) -> "ExperimentConfig | FdrStudyConfig":
    d = dict(d)
    study = d.pop("study", None)
    try:
        if study == "error":
            if "design" in d:
                d["design"] = _design_from(d["design"])
            return ExperimentConfig(**d)
        if study == "fdr":
            return FdrStudyConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"bad {study} config: {exc}") from None
    raise ConfigError(f"config needs \"study\": \"error\" or \"fdr\", got {study!r}")


def load_config(path: str | Path) -> "ExperimentConfig | FdrStudyConfig":
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(raw)


def bundled_config(name: str) -> Path:
    return Path(__file__).parent / "configs" / name


__all__ = [
    "ConfigError",
    "ERROR_CSV_COLUMNS",
    "ErrorStudyResult",
    "ExperimentConfig",
    "FDR_CSV_COLUMNS",
    "FdrReplication",
    "FdrStudyConfig",
    "FdrStudyResult",
    "Response",
    "SimDesign",
    "bundled_config",
    "config_from_dict",
    "default_threads",
    "fdr_replication",
    "gen_dataset",
    "gen_response",
    "interquartile_sign",
    "load_config",
    "reference_cpi",
    "run_error_study",
    "run_fdr_study",
]
