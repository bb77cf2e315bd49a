"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data or validation error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .baselines import CoxPHSurvival
from .data import Standardizer, read_csv, read_table, write_csv, write_dataset
from .estimators import RandomSurvivalForest
from .evaluation import (
    METHODS,
    BenchmarkGrid,
    benchmark_grid,
    curve_target_predictions,
    mse_vs_truth,
    plotdata,
    stratified_cv_brier,
    summarize,
)
from .exceptions import CudlError, NumericalError
from .network import NetworkConfig
from .pipeline import DEFAULT_FOREST, DEFAULT_TREE, CudlModel, CudlSpec, Target, fit_cudl, fit_nuisance
from .simulation import SettingConfig, simulate
from .transforms import dataset_terms

logger = logging.getLogger("cudl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
TRUTH_COLUMNS = ("true_surv_t", "true_rms_tau")
_SPEC_KEYS = ("eta_grid", "cv_folds", "refit_nuisance_per_fold", "objective")


class UsageError(Exception):
    """Bad flag or configuration value."""


# ----------------------------------------------------------------- helpers

def _write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file; ``-`` means stdout."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _csv_text(header, columns):
    buf = io.StringIO()
    write_csv(buf, header, columns)
    return buf.getvalue()


def _frame_text(df):
    return df.to_csv(index=False, lineterminator="\n", float_format="%.17g")


def _target(text):
    try:
        return Target.parse(text)
    except CudlError as exc:
        raise UsageError(f"--target: {exc}") from None


def load_config(path):
    """Read a TOML config with optional tables ``[cudl]``, ``[network]``, ``[forest]``, ``[tree]``."""
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"--config {path}: {exc}") from None
    allowed = {
        "cudl": set(_SPEC_KEYS),
        "network": {f.name for f in fields(NetworkConfig)} - {"head", "eta", "seed"},
        "forest": set(DEFAULT_FOREST) | {"max_depth", "bootstrap"},
        "tree": set(DEFAULT_TREE),
    }
    for section, body in cfg.items():
        if section not in allowed:
            raise UsageError(f"--config {path}: unknown section [{section}]")
        bad = set(body) - allowed[section]
        if bad:
            raise UsageError(f"--config {path}: unknown keys {sorted(bad)} in [{section}]")
    return cfg


def build_spec(target, variant, cfg, seed):
    return CudlSpec(
        target=target,
        variant=variant,
        network=NetworkConfig(**cfg.get("network", {})),
        forest={**DEFAULT_FOREST, **cfg.get("forest", {})},
        tree={**DEFAULT_TREE, **cfg.get("tree", {})},
        seed=seed,
        **cfg.get("cudl", {}),
    )


def _read_covariates(path):
    """Covariate matrix from a CSV; ``time``/``event`` and truth columns are ignored if present."""
    header, values = read_table(path)
    keep = [j for j, h in enumerate(header) if h not in ("time", "event", *TRUTH_COLUMNS)]
    return values[:, keep]


# ---------------------------------------------------------------- commands

def cmd_simulate(args):
    data, truth = simulate(SettingConfig(args.setting, args.n, args.p, args.seed))
    extra = {}
    if args.t is not None:
        extra["true_surv_t"] = truth.survival(args.t)
    if args.tau is not None:
        extra["true_rms_tau"] = truth.rms(args.tau)
    buf = io.StringIO()
    write_dataset(buf, data, extra=extra)
    _write_atomic(args.out, buf.getvalue())


def cmd_transform(args):
    data, _, _ = read_csv(args.input, extra_columns=TRUTH_COLUMNS)
    spec = build_spec(_target(args.target), args.variant, load_config(args.config), args.seed)
    data_r = spec.target.restrict(data)
    nz = fit_nuisance(data_r, spec)
    d = dataset_terms(data_r, nz.g_model, nz.s_model, spec.target.h).combined(1)
    Z = Standardizer().fit_transform(data_r.covariates)
    header = ["d", *[f"z{j + 1}" for j in range(data.p)]]
    _write_atomic(args.out, _csv_text(header, [d, *Z.T]))


def cmd_fit(args):
    data, _, _ = read_csv(args.input, extra_columns=TRUTH_COLUMNS)
    target = _target(args.target)
    cfg = load_config(args.config)
    if args.method.startswith("cudl"):
        model = fit_cudl(data, build_spec(target, args.method[-2:], cfg, args.seed)).to_dict()
    elif args.method == "cox":
        model = CoxPHSurvival().fit(data.covariates, data.y).to_dict()
    else:
        forest = RandomSurvivalForest(**{**DEFAULT_FOREST, **cfg.get("forest", {})},
                                      random_state=args.seed)
        model = forest.fit(data.covariates, data.y).to_dict()
    doc = {"method": args.method, "target": str(target), "n_features": data.p, "model": model}
    _write_atomic(args.out, json.dumps(doc, sort_keys=True) + "\n")


def load_model(path):
    """Returns ``(method, target, predict_fn)`` for a model JSON written by ``fit``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        method, target = doc["method"], Target.parse(doc["target"])
    except (json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"--model {path}: not a model file ({exc})") from None
    if method.startswith("cudl"):
        model = CudlModel.from_dict(doc["model"])
        return method, target, model.predict
    cls = CoxPHSurvival if method == "cox" else RandomSurvivalForest
    model = cls.from_dict(doc["model"])
    return method, target, lambda X: curve_target_predictions(model, target.kind, target.horizon, X)


def cmd_predict(args):
    _, _, fn = load_model(args.model)
    X = _read_covariates(args.input)
    pred = np.asarray(fn(X), dtype=float)
    if not np.all(np.isfinite(pred)):
        raise NumericalError("non-finite predictions")
    _write_atomic(args.out, _csv_text(["prediction"], [pred]))


def cmd_evaluate_mse(args):
    _, pred = read_table(args.pred)
    header, truth_table = read_table(args.truth)
    if args.column not in header:
        raise UsageError(f"--column: {args.column!r} not found in {args.truth}")
    score = mse_vs_truth(pred[:, 0], truth_table[:, header.index(args.column)])
    _write_atomic(args.out, json.dumps({"mse": score}) + "\n")


def cmd_evaluate_brier(args):
    data, _, _ = read_csv(args.input, extra_columns=TRUTH_COLUMNS)
    cfg = load_config(args.config)
    cudl_params = None
    if args.method.startswith("cudl"):
        spec = build_spec(Target("brier", args.t), args.method[-2:], cfg, 0)
        cudl_params = _regressor_params(spec)
    result = stratified_cv_brier(data, args.t, args.method, folds=args.folds, splits=args.splits,
                                 seed=args.seed, tree_params=cfg.get("tree"),
                                 cudl_params=cudl_params, forest_params=cfg.get("forest"))
    text = _csv_text(["split", "brier"], [np.arange(result.scores.size), result.scores])
    _write_atomic(args.out, text)
    logger.info("method=%s t=%r median_brier=%.6g", args.method, args.t, result.median)


def _regressor_params(spec):
    net = spec.network
    return dict(eta_grid=spec.eta_grid, cv_folds=spec.cv_folds, hidden_units=net.hidden_units,
                epochs=net.epochs, batch_size=net.batch_size, dropout_rate=net.dropout_rate,
                learning_rate=net.learning_rate, n_estimators=spec.forest["n_estimators"],
                min_samples_leaf=spec.forest["min_samples_leaf"],
                censoring_min_leaf=spec.tree["min_leaf"], trunc_frac=spec.tree["trunc_frac"],
                refit_nuisance_per_fold=spec.refit_nuisance_per_fold)


def load_grid(path, seed=None):
    """Parse a benchmark grid TOML; top-level keys mirror :class:`BenchmarkGrid` (``n`` for ``n_values``)."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"--grid {path}: {exc}") from None
    if "n" in raw:
        raw["n_values"] = raw.pop("n")
    names = {f.name for f in fields(BenchmarkGrid)}
    bad = set(raw) - names
    if bad:
        raise UsageError(f"--grid {path}: unknown keys {sorted(bad)}")
    for key in ("settings", "methods", "targets", "n_values"):
        if key in raw:
            raw[key] = tuple(raw[key])
    if seed is not None:
        raw["seed"] = seed
    if "seed" not in raw:
        raise UsageError("benchmark needs a seed: pass --seed or set seed in the grid file")
    return BenchmarkGrid(**raw)


def cmd_benchmark(args):
    grid = load_grid(args.grid, args.seed)
    results = benchmark_grid(grid, jobs=args.jobs)
    _write_atomic(args.out, _frame_text(results))
    if args.summary:
        _write_atomic(args.summary, _frame_text(summarize(results)))
    failed = int((results["status"] != "ok").sum())
    logger.info("benchmark done: %d rows, %d failed", len(results), failed)


def cmd_plotdata(args):
    import pandas as pd

    results = pd.read_csv(args.input)
    missing = {"setting", "method", "target", "n", "mse", "status"} - set(results.columns)
    if missing:
        raise UsageError(f"--in {args.input}: missing columns {sorted(missing)}")
    _write_atomic(args.out, _frame_text(plotdata(results)))


# ------------------------------------------------------------------ parser

def build_parser():
    parser = argparse.ArgumentParser(prog="cudl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--quiet", action="store_true", help="suppress progress lines on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a simulated dataset")
    p.add_argument("--setting", type=int, choices=(1, 2), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, default=30)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--t", type=float, help="add true P(T >= t | W) as column true_surv_t")
    p.add_argument("--tau", type=float, help="add true E[min(T, tau) | W] as column true_rms_tau")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("transform", help="write pseudo-responses and standardized covariates")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--variant", choices=("dr", "bj"), required=True)
    p.add_argument("--target", required=True, help="brier:T or rms:TAU")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("fit", help="fit a model and save it as JSON")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--target", required=True, help="brier:T or rms:TAU")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict the fitted target for new covariates")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions")
    ev = p.add_subparsers(dest="protocol", required=True)
    q = ev.add_parser("mse", help="mean squared error against a truth column")
    q.add_argument("--pred", required=True, help="CSV whose first column holds predictions")
    q.add_argument("--truth", required=True, help="CSV holding the truth column")
    q.add_argument("--column", default="true_surv_t")
    q.add_argument("--out", default="-")
    q.set_defaults(func=cmd_evaluate_mse)
    q = ev.add_parser("brier-cv", help="censoring-stratified cross-validated Brier score")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--method", choices=METHODS, required=True)
    q.add_argument("--t", type=float, required=True)
    q.add_argument("--folds", type=int, default=5)
    q.add_argument("--splits", type=int, default=10)
    q.add_argument("--config")
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--out", default="-")
    q.set_defaults(func=cmd_evaluate_brier)

    p = sub.add_parser("benchmark", help="run a simulation grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="also write per-cell mean, median and quartiles")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("plotdata", help="long-format per-method quartiles from benchmark results")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        handlers=[handler], force=True)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"cudl {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"cudl {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CudlError, ValueError, OSError) as exc:
        print(f"cudl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
