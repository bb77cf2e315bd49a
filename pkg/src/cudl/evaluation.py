"""Evaluation protocols: simulated-truth MSE grids and censoring-stratified CV Brier scores."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, clone

from ._seeding import derive_seed
from .baselines import CoxPHSurvival
from .curves import restricted_mean_from_curve
from .data import Dataset, restrict_brier
from .estimators import CensoringTree, RandomSurvivalForest
from .exceptions import DegenerateFoldError, InvalidParameterError
from .losses import censored_brier
from .pipeline import DEFAULT_FOREST, DEFAULT_TREE, CUDLRegressor, CudlSpec, Nuisance, Target, fit_cudl, fit_nuisance
from .network import NetworkConfig
from .simulation import SettingConfig, marginal_quantile, simulate

logger = logging.getLogger(__name__)

METHODS = ("cudl-dr", "cudl-bj", "cox", "rsf")
RESULT_COLUMNS = ["setting", "method", "target", "n", "replication", "mse", "status", "error"]


def mse_vs_truth(predictions, truths):
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truths, dtype=float).ravel()
    if p.size != t.size:
        raise InvalidParameterError(f"length mismatch: {p.size} predictions vs {t.size} truths")
    return float(np.mean((p - t) ** 2))


class CurveTargetRegressor(BaseEstimator):
    """Turns a survival-curve model into a point predictor for one target.

    ``brier`` predicts ``P(T >= t | w)`` as the left limit of the fitted
    curve at ``t``; ``rms`` integrates ``min(T, tau)`` against it.
    """

    def __init__(self, estimator=None, target="brier", horizon=1.0):
        self.estimator = estimator
        self.target = target
        self.horizon = horizon

    def fit(self, X, y):
        self.estimator_ = clone(self.estimator).fit(X, y)
        return self

    def predict(self, X):
        return curve_target_predictions(self.estimator_, self.target, self.horizon, X)


def curve_target_predictions(model, target, horizon, X):
    """``P(T >= t | w)`` (left limit at ``t``) or ``E[min(T, tau) | w]`` from a curve model."""
    curves = model.predict_curves(X)
    if target == "brier":
        return np.array([c.eval_left(horizon) for c in curves])
    return np.array([restricted_mean_from_curve(c, horizon) for c in curves])


def make_method(name, target, seed=0, cudl_params=None, forest_params=None):
    """Unfitted estimator for a method name; ``predict`` returns target predictions."""
    target = Target.parse(target) if isinstance(target, str) else target
    if name in ("cudl-dr", "cudl-bj"):
        return CUDLRegressor(variant=name[-2:], target=target.kind, horizon=target.horizon,
                             random_state=seed, **(cudl_params or {}))
    if name == "cox":
        return CurveTargetRegressor(CoxPHSurvival(), target.kind, target.horizon)
    if name == "rsf":
        forest = RandomSurvivalForest(**{**DEFAULT_FOREST, **(forest_params or {})},
                                      random_state=seed)
        return CurveTargetRegressor(forest, target.kind, target.horizon)
    raise InvalidParameterError(f"unknown method {name!r}; expected one of {METHODS}")


# ------------------------------------------------------ stratified CV Brier

def stratified_folds(event, n_folds, rng):
    """Fold labels with censored and uncensored rows spread evenly.

    Each stratum is shuffled, the censored rows are dealt round-robin
    starting at fold 0 and the uncensored rows continue the same cycle.
    Within each stratum fold sizes differ by at most one, and so do the
    total fold sizes.
    """
    event = np.asarray(event)
    n = event.size
    if n_folds < 2 or n_folds > n:
        raise InvalidParameterError(f"need 2 <= folds <= n, got folds={n_folds}, n={n}")
    cens = rng.permutation(np.flatnonzero(event == 0))
    unc = rng.permutation(np.flatnonzero(event == 1))
    labels = np.empty(n, dtype=np.int64)
    labels[np.concatenate([cens, unc])] = np.arange(n) % n_folds
    return labels


@dataclass
class BrierCVResult:
    t: float
    method: str
    scores: np.ndarray
    fold_censoring_rates: list = field(default_factory=list)

    @property
    def median(self):
        return float(np.median(self.scores))


def _method_factory(method, t, cudl_params=None, forest_params=None):
    if callable(method) and not isinstance(method, str):
        return method
    return lambda seed: make_method(method, Target("brier", t), seed, cudl_params, forest_params)


def _score_split(data, t, factory, folds, seed, s, tree_params):
    labels = stratified_folds(data.event, folds, np.random.default_rng(derive_seed(seed, "split", s)))
    total = 0.0
    rates = []
    for f in range(folds):
        held = np.flatnonzero(labels == f)
        train = np.flatnonzero(labels != f)
        rates.append(float(1 - data.event[held].mean()))
        held_t = restrict_brier(data.subset(held), t)
        if not held_t.event.any():
            raise DegenerateFoldError(f"split {s}, fold {f} has no uncensored rows at t={t}")
        train_data = data.subset(train)
        est = factory(derive_seed(seed, "model", s, f))
        est.fit(train_data.covariates, train_data.y)
        pred = np.asarray(est.predict(held_t.covariates), dtype=float)
        g = CensoringTree(**tree_params).fit(train_data.covariates,
                                             restrict_brier(train_data, t).y)
        total += censored_brier(held_t, pred, g, t).value * held.size
    return total / data.n, rates


def stratified_cv_brier(data: Dataset, t, method, folds=5, splits=10, seed=0,
                        tree_params=None, cudl_params=None, forest_params=None, jobs=1):
    """Cross-validated censored-data Brier score at time ``t``.

    For each split, rows are dealt into censoring-stratified folds; each
    fold is predicted by a model trained on the complement and scored with
    the inverse-probability-of-censoring weighted Brier loss, using a
    censoring tree fitted on the same complement.  Per-split scores pool
    every row's contribution.

    Parameters
    ----------
    method : str or callable
        A name from :data:`METHODS`, or ``factory(seed)`` returning an
        unfitted estimator whose ``predict`` gives ``P(T >= t | w)``.
    jobs : int
        Splits run in parallel when not 1; every split has its own derived
        seeds, so scores do not depend on ``jobs``.
    """
    factory = _method_factory(method, t, cudl_params, forest_params)
    tree_params = {**DEFAULT_TREE, **(tree_params or {})}
    if jobs in (None, 1):
        out = [_score_split(data, t, factory, folds, seed, s, tree_params) for s in range(splits)]
    else:
        out = Parallel(n_jobs=jobs)(
            delayed(_score_split)(data, t, factory, folds, seed, s, tree_params)
            for s in range(splits)
        )
    scores = np.array([score for score, _ in out], dtype=float)
    name = method if isinstance(method, str) else getattr(method, "__name__", "custom")
    return BrierCVResult(float(t), name, scores, [rates for _, rates in out])


# ---------------------------------------------------------- benchmark grid

@dataclass
class BenchmarkGrid:
    """Simulation grid: every combination of settings, targets and sample sizes."""

    settings: tuple = (1, 2)
    methods: tuple = ("cudl-dr", "cudl-bj", "cox")
    targets: tuple = ("brier",)
    n_values: tuple = (500,)
    replications: int = 50
    seed: int = 0
    p: int = 30
    n_test: int = 1000
    brier_quantile: float = 0.5
    rms_quantile: float = 0.85
    n_mc: int = 200_000
    cudl: dict = field(default_factory=dict)
    forest: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InvalidParameterError(f"unknown methods {sorted(unknown)}")
        unknown = set(self.targets) - {"brier", "rms"}
        if unknown:
            raise InvalidParameterError(f"unknown targets {sorted(unknown)}")
        if self.replications < 0:
            raise InvalidParameterError("replications must be >= 0")

    def units(self):
        return [(s, tg, n, r) for s in self.settings for tg in self.targets
                for n in self.n_values for r in range(self.replications)]


def horizon_for(grid, setting, target):
    """Marginal failure-time quantile (``brier``) or observed-time quantile (``rms``)."""
    qseed = derive_seed(grid.seed, "quantile", setting)
    if target == "brier":
        return marginal_quantile(setting, grid.brier_quantile, grid.n_mc, qseed, "failure", grid.p)
    return marginal_quantile(setting, grid.rms_quantile, grid.n_mc, qseed, "observed", grid.p)


def _cudl_spec(grid, target, variant, seed):
    params = dict(grid.cudl)
    net = NetworkConfig(**params.pop("network", {}))
    return CudlSpec(target=target, variant=variant, network=net,
                    forest={**DEFAULT_FOREST, **grid.forest}, seed=seed, **params)


def run_unit(grid, setting, target_kind, n, rep, horizon):
    """All methods on one simulated training/test pair; returns result rows."""
    train, _ = simulate(SettingConfig(setting, n, grid.p, derive_seed(grid.seed, "train", setting, n, rep)))
    test, test_truth = simulate(
        SettingConfig(setting, grid.n_test, grid.p, derive_seed(grid.seed, "test", setting, n, rep))
    )
    target = Target(target_kind, horizon)
    truth = test_truth.survival(horizon) if target_kind == "brier" else test_truth.rms(horizon)
    seed = derive_seed(grid.seed, "method", setting, target_kind, n, rep)
    shared_forest = None
    rows = []
    for method in grid.methods:
        row = dict(setting=setting, method=method, target=target_kind, n=n, replication=rep,
                   mse=np.nan, status="ok", error="")
        started = time.perf_counter()
        try:
            if method.startswith("cudl"):
                spec = _cudl_spec(grid, target, method[-2:], seed)
                data_r = target.restrict(train)
                # the forest depends only on (data, seed), so both variants share it
                if shared_forest is None:
                    shared_forest = fit_nuisance(data_r, CudlSpec(target, "bj", forest=spec.forest,
                                                                  seed=seed)).s_model
                g = CensoringTree(**spec.tree).fit(data_r.covariates, data_r.y) \
                    if spec.variant == "doubly_robust" else None
                model = fit_cudl(train, spec, Nuisance(g, shared_forest))
                pred = model.predict(test.covariates)
            else:
                est = make_method(method, target, seed, forest_params=grid.forest)
                pred = est.fit(train.covariates, train.y).predict(test.covariates)
            row["mse"] = mse_vs_truth(pred, truth)
        except Exception as exc:  # a failed cell must not abort the grid
            row["status"] = "failed"
            row["error"] = f"{type(exc).__name__}: {exc}"
        logger.info("cell=setting:%s/method:%s/target:%s/n:%s/rep:%s status=%s mse=%.6g secs=%.1f",
                    setting, method, target_kind, n, rep, row["status"], row["mse"],
                    time.perf_counter() - started)
        rows.append(row)
    return rows


def benchmark_grid(grid: BenchmarkGrid, jobs=1):
    """Run the grid; returns one row per (cell, replication), sorted by cell identity."""
    units = grid.units()
    if not units:
        return pd.DataFrame(columns=RESULT_COLUMNS)
    horizons = {(s, tg): horizon_for(grid, s, tg) for s in grid.settings for tg in grid.targets}
    if jobs in (None, 1):
        chunks = [run_unit(grid, s, tg, n, r, horizons[s, tg]) for s, tg, n, r in units]
    else:
        chunks = Parallel(n_jobs=jobs)(
            delayed(run_unit)(grid, s, tg, n, r, horizons[s, tg]) for s, tg, n, r in units
        )
    df = pd.DataFrame([row for chunk in chunks for row in chunk], columns=RESULT_COLUMNS)
    order = {m: i for i, m in enumerate(grid.methods)}
    df["_m"] = df["method"].map(order)
    df = df.sort_values(["setting", "target", "n", "_m", "replication"], kind="stable")
    return df.drop(columns="_m").reset_index(drop=True)


def summarize(results):
    """Per-cell mean, median and quartiles of the MSE over successful replications."""
    ok = results[results["status"] == "ok"]
    g = ok.groupby(["setting", "method", "target", "n"], sort=True)["mse"]
    return pd.DataFrame({
        "mean": g.mean(), "q1": g.quantile(0.25), "median": g.median(), "q3": g.quantile(0.75),
        "count": g.size(),
    }).reset_index()


def plotdata(results):
    """Long-format quartiles (one row per cell and statistic) for plotting tools."""
    summary = summarize(results)
    return summary.melt(id_vars=["setting", "method", "target", "n"],
                        value_vars=["q1", "median", "q3", "mean"],
                        var_name="statistic", value_name="value")
