"""Command-line interface.

Subcommands::

    cpi test       --data FILE --target COL [...]   CPI tests on a CSV dataset
    cpi knockoffs  --data FILE [--target COL]       export Gaussian knockoffs
    cpi sim-error  CONFIG.json                      error-rate simulation
    cpi sim-fdr    CONFIG.json                      FDR/power simulation
    cpi sim        CONFIG.json                      either, by the config's "study"

Every run prints its fully resolved configuration to stderr. Exit codes:
0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from typing import Any, Sequence, TextIO

import numpy as np

from .data import DataError, FeatureSubset, RngStream, Task, load_csv, read_numeric_csv, write_csv
from .engine import INFERENCE_METHODS, run_cpi_many, shrinkage_sampler
from .inference import FisherConfig, adjust
from .knockoffs import SHRINKAGE_METHODS, fit_gaussian_knockoffs, knockoff_names, sample_knockoffs
from .learners import LEARNERS, make_learner
from .learners.losses import Loss
from .resampling import parse_risk, risk_to_str
from .simlab import (ERROR_CSV_COLUMNS, FDR_CSV_COLUMNS, ConfigError, ExperimentConfig,
                     FdrStudyConfig, default_threads, load_config, run_error_study, run_fdr_study)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
DEFAULT_SEED = 42
TEST_CSV_COLUMNS = ("feature", "cpi", "se", "statistic", "p", "p_adjusted", "ci_lower")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cpi", description="Conditional predictive impact testing.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test features of a CSV dataset")
    t.add_argument("--data", required=True, help="numeric CSV with a header row")
    t.add_argument("--target", required=True, help="response column")
    t.add_argument("--task", default="regression", help="regression | classification")
    t.add_argument("--learner", default="ols",
                   help=f"one of {sorted(LEARNERS)}, optionally with parameters, e.g. rf:100")
    t.add_argument("--loss", default="mse", help="mse | mae | ce | mmce")
    t.add_argument("--resampling", default="holdout:1/3",
                   help="holdout:F | kfold:K | subsample:B:F")
    t.add_argument("--test", default="t", choices=INFERENCE_METHODS)
    t.add_argument("--adjust", default="none", choices=("none", "holm", "bh"))
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--features", action="append", default=None,
                   help="comma-separated 1-based indices or names forming one joint subset; repeatable")
    t.add_argument("--fisher-draws", type=int, default=10_000)
    t.add_argument("--shrinkage", default="grid", choices=SHRINKAGE_METHODS)
    t.add_argument("--format", default="csv", choices=("csv", "json"))
    _common(t)

    k = sub.add_parser("knockoffs", help="write Gaussian knockoffs of a CSV's features")
    k.add_argument("--data", required=True)
    k.add_argument("--target", default=None, help="column to leave out of the feature matrix")
    k.add_argument("--shrinkage", default="grid", choices=SHRINKAGE_METHODS)
    _common(k)

    for name, helptext in (("sim", "run the study named in a JSON config"),
                           ("sim-error", "error-rate and coverage study"),
                           ("sim-fdr", "FDR and power study")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config", help="JSON config; bundled: error_linear.json, fdr_desk.json")
        s.add_argument("--replications", type=int, default=None, help="override the config")
        _common(s, seed_default=None)
    return p


def _common(p: argparse.ArgumentParser, seed_default: int | None = DEFAULT_SEED) -> None:
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--threads", type=int, default=None, help="default: available cores")
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def _print_config(cfg: dict, err: TextIO) -> None:
    print("config: " + json.dumps(cfg, sort_keys=True, default=str), file=err)


def _open_out(path: str | None, out: TextIO):
    if path is None:
        return out, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _write_rows(rows: Sequence[dict], columns: Sequence[str], path: str | None, out: TextIO) -> None:
    fh, close = _open_out(path, out)
    try:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in columns})
    finally:
        if close:
            fh.close()


def _fmt(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def parse_features(specs: Sequence[str] | None, names: Sequence[str]) -> list[FeatureSubset]:
    """Each spec is one joint subset of 1-based indices or column names."""
    p = len(names)
    if not specs:
        return [FeatureSubset((j,), p) for j in range(p)]
    out = []
    for spec in specs:
        idx = []
        for tok in (t.strip() for t in spec.split(",")):
            if not tok:
                continue
            if tok in names:
                idx.append(names.index(tok))
                continue
            try:
                k = int(tok)
            except ValueError:
                raise ConfigError(f"unknown feature {tok!r}; columns are {list(names)}") from None
            if not 1 <= k <= p:
                raise ConfigError(f"feature index {k} out of range 1..{p}")
            idx.append(k - 1)
        if not idx:
            raise ConfigError(f"empty feature subset {spec!r}")
        out.append(FeatureSubset(tuple(idx), p))
    return out


def cmd_test(args, out: TextIO, err: TextIO) -> int:
    try:
        task = Task.parse(args.task)
        learner = make_learner(args.learner)
        loss = Loss.parse(args.loss)
        if not loss.compatible_with(task):
            raise ConfigError(f"loss {loss.value!r} needs a classification task")
        risk = parse_risk(args.resampling)
        if not 0 < args.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        z = load_csv(args.data, args.target, task)
        subsets = parse_features(args.features, list(z.feature_names))
        fisher = FisherConfig(n_draws=args.fisher_draws)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG
    _print_config({
        "command": "test", "data": args.data, "target": args.target, "task": task.value,
        "learner": _learner_repr(learner), "loss": loss.value, "resampling": risk_to_str(risk),
        "test": args.test, "adjust": args.adjust, "alpha": args.alpha, "seed": args.seed,
        "features": [s.label(z.feature_names) for s in subsets], "fisher_draws": args.fisher_draws,
        "shrinkage": args.shrinkage, "threads": _threads(args), "n": z.n, "p": z.p,
    }, err)
    try:
        res = run_cpi_many(z, subsets, learner, loss, risk, args.test, args.alpha,
                           RngStream(args.seed), fisher,
                           knockoff_sampler=shrinkage_sampler(args.shrinkage))
        p_adj = adjust([r.p_value for r in res], args.adjust)
    except ValueError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME
    rows = []
    for sub, r, pa in zip(subsets, res, p_adj):
        rows.append({"feature": sub.label(z.feature_names), "cpi": r.cpi, "se": r.se,
                     "statistic": r.statistic, "p": r.p_value, "p_adjusted": float(pa),
                     "ci_lower": r.ci_lower})
        if r.warning:
            print(f"warning: {sub.label(z.feature_names)}: {r.warning}", file=err)
    if args.format == "json":
        fh, close = _open_out(args.out, out)
        try:
            json.dump([{k: (v if not isinstance(v, float) or np.isfinite(v) else None)
                        for k, v in row.items()} for row in rows], fh, indent=2)
            fh.write("\n")
        finally:
            if close:
                fh.close()
    else:
        _write_rows(rows, TEST_CSV_COLUMNS, args.out, out)
    return EXIT_OK


def _learner_repr(learner) -> dict:
    if dataclasses.is_dataclass(learner):
        return {"kind": getattr(learner, "name", type(learner).__name__), **dataclasses.asdict(learner)}
    return {"kind": type(learner).__name__}


def _threads(args) -> int:
    return args.threads if args.threads is not None else default_threads()


def cmd_knockoffs(args, out: TextIO, err: TextIO) -> int:
    try:
        header, data = read_numeric_csv(args.data)
        if args.target is not None:
            if args.target not in header:
                raise DataError(f"target column {args.target!r} not found; columns are {list(header)}")
            keep = [j for j, h in enumerate(header) if h != args.target]
        else:
            keep = list(range(len(header)))
        names = [header[j] for j in keep]
        x = data[:, keep]
        if x.shape[1] == 0:
            raise DataError("no feature columns to knock off")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG
    _print_config({"command": "knockoffs", "data": args.data, "target": args.target,
                   "shrinkage": args.shrinkage, "seed": args.seed, "n": x.shape[0],
                   "p": x.shape[1]}, err)
    try:
        model = fit_gaussian_knockoffs(x, args.shrinkage)
        x_tilde = sample_knockoffs(model, x, RngStream(args.seed))
    except ValueError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME
    s = model.s
    print(f"s: min={s.min():.6g} median={np.median(s):.6g} max={s.max():.6g} "
          f"shrinkage={model.shrinkage:.6g}", file=err)
    ko = knockoff_names(names)
    if args.out is None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(ko)
        for row in x_tilde:
            w.writerow([repr(float(v)) for v in row])
    else:
        write_csv(args.out, x_tilde, ko)
    return EXIT_OK


def cmd_sim(args, out: TextIO, err: TextIO) -> int:
    try:
        cfg = load_config(args.config)
        want = {"sim-error": ExperimentConfig, "sim-fdr": FdrStudyConfig}.get(args.command)
        if want is not None and not isinstance(cfg, want):
            raise ConfigError(f"{args.config} is not a {args.command[4:]} study config")
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.replications is not None:
            overrides["replications"] = args.replications
        cfg = dataclasses.replace(cfg, **overrides)
    except (ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG
    threads = _threads(args)
    _print_config({**cfg.to_dict(), "threads": threads}, err)
    try:
        if isinstance(cfg, ExperimentConfig):
            res = run_error_study(cfg, threads)
            rows, columns = res.rows(), ERROR_CSV_COLUMNS
            null = [j for j, b in enumerate(res.beta) if b == 0]
            summary = ", ".join(f"x{j + 1}={res.rejection_rate[j]:.3f}" for j in null)
            print(f"type I error (alpha = {cfg.alpha:g}, {res.replications} reps): "
                  f"{summary or 'no null features'}", file=err)
        else:
            res = run_fdr_study(cfg, threads)
            rows, columns = res.rows(), FDR_CSV_COLUMNS
            summary = "; ".join(f"{r['method']} cell {r['cell']} fdr={r['fdr']:.3f} power={r['power']:.3f}"
                                for r in rows)
            print(f"FDR (q = {cfg.q:g}, {cfg.replications} reps): {summary}", file=err)
    except ValueError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME
    _write_rows(rows, columns, args.out, out)
    return EXIT_OK


COMMANDS = {"test": cmd_test, "knockoffs": cmd_knockoffs,
            "sim": cmd_sim, "sim-error": cmd_sim, "sim-fdr": cmd_sim}


def main(argv: Sequence[str] | None = None, out: TextIO | None = None,
         err: TextIO | None = None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=err)
        return EXIT_CONFIG
    return COMMANDS[args.command](args, out, err)


if __name__ == "__main__":
    sys.exit(main())
