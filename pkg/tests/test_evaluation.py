import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cudl.data import Dataset
from cudl.evaluation import (
    RESULT_COLUMNS,
    BenchmarkGrid,
    benchmark_grid,
    make_method,
    mse_vs_truth,
    plotdata,
    stratified_cv_brier,
    stratified_folds,
    summarize,
)
from cudl.exceptions import DegenerateFoldError, InvalidParameterError
from cudl.simulation import SettingConfig, simulate


def test_mse_examples():
    assert mse_vs_truth([0.2, 0.4], [0.2, 0.4]) == 0.0
    assert mse_vs_truth(np.full(4, 0.6), np.full(4, 0.5)) == pytest.approx(0.01)
    assert mse_vs_truth([1.0, 2.0, 4.0], [0.0, 0.0, 0.0]) == pytest.approx(7.0)
    with pytest.raises(InvalidParameterError):
        mse_vs_truth([1.0], [1.0, 2.0])


@settings(max_examples=200, deadline=None)
@given(events=st.lists(st.integers(0, 1), min_size=10, max_size=200), seed=st.integers(0, 10**6))
def test_stratified_folds_properties(events, seed):
    events = np.array(events)
    n = events.size
    labels = stratified_folds(events, 5, np.random.default_rng(seed))
    assert labels.shape == (n,) and set(labels) <= set(range(5))
    for stratum in (0, 1):
        counts = np.bincount(labels[events == stratum], minlength=5)
        assert counts.max() - counts.min() <= 1
    sizes = np.bincount(labels, minlength=5)
    assert sizes.max() - sizes.min() <= 1
    rates = np.array([1 - events[labels == f].mean() for f in range(5)])
    assert np.ptp(rates) <= 1 / (n // 5) + np.finfo(float).eps


class ColumnZero:
    """Predicts the first covariate, which the tests set to the true indicator."""

    def fit(self, X, y):
        return self

    def predict(self, X):
        return np.asarray(X)[:, 0]


class Constant:
    def __init__(self, value):
        self.value = value

    def fit(self, X, y):
        return self

    def predict(self, X):
        return np.full(len(X), self.value)


def uncensored(rng, n=60, t=1.0):
    T = rng.exponential(size=n)
    return Dataset(T, np.ones(n, dtype=int), np.column_stack([(T >= t).astype(float),
                                                              rng.normal(size=n)])), t


def test_cv_brier_oracle_and_constant(rng):
    d, t = uncensored(rng)
    res = stratified_cv_brier(d, t, lambda seed: ColumnZero(), splits=3, seed=1)
    assert np.all(res.scores == 0.0) and res.median == 0.0
    res = stratified_cv_brier(d, t, lambda seed: Constant(0.5), splits=3, seed=1)
    assert np.allclose(res.scores, 0.25, atol=1e-15)


def test_cv_brier_degenerate_fold():
    n = 20
    d = Dataset(np.linspace(0.1, 0.5, n), np.zeros(n, dtype=int), np.zeros((n, 1)))
    with pytest.raises(DegenerateFoldError):
        stratified_cv_brier(d, 1.0, lambda seed: Constant(0.5), splits=1)


def test_cv_brier_named_method_runs():
    d, _ = simulate(SettingConfig(1, 200, 30, seed=3))
    res = stratified_cv_brier(d, 0.67, "cox", splits=2, seed=0)
    assert res.scores.shape == (2,) and np.all(np.isfinite(res.scores))
    assert np.all(np.ptp(res.fold_censoring_rates, axis=1) <= 1 / 40 + 1e-12)
    res2 = stratified_cv_brier(d, 0.67, "cox", splits=2, seed=0)
    assert np.array_equal(res.scores, res2.scores)
    res3 = stratified_cv_brier(d, 0.67, "cox", splits=2, seed=0, jobs=2)
    assert np.array_equal(res.scores, res3.scores)


def test_make_method_unknown():
    with pytest.raises(InvalidParameterError):
        make_method("svm", "brier:1")


FAST = dict(n_values=(120,), n_test=50, n_mc=2000,
            cudl={"eta_grid": [0.0], "network": {"epochs": 5}}, forest={"n_estimators": 5})


def test_benchmark_one_cell_two_reps_reproducible():
    grid = BenchmarkGrid(settings=(1,), methods=("cox",), replications=2, seed=3, **FAST)
    a = benchmark_grid(grid)
    b = benchmark_grid(grid)
    assert list(a.columns) == RESULT_COLUMNS and len(a) == 2
    pd.testing.assert_frame_equal(a, b)
    assert np.all(np.isfinite(a["mse"]))


def test_benchmark_empty_grid():
    res = benchmark_grid(BenchmarkGrid(replications=0))
    assert len(res) == 0 and list(res.columns) == RESULT_COLUMNS


def test_benchmark_dr_bj_and_order_independence():
    kw = dict(methods=("cudl-dr", "cudl-bj", "rsf"), replications=1, seed=5, **FAST)
    a = benchmark_grid(BenchmarkGrid(settings=(1, 2), **kw))
    b = benchmark_grid(BenchmarkGrid(settings=(2, 1), **kw))
    assert set(a["method"]) == {"cudl-dr", "cudl-bj", "rsf"}
    assert (a["status"] == "ok").all() and np.all(np.isfinite(a["mse"]))
    key = ["setting", "method", "replication"]
    pd.testing.assert_frame_equal(a.sort_values(key).reset_index(drop=True),
                                  b.sort_values(key).reset_index(drop=True))


def test_failed_cell_does_not_abort():
    grid = BenchmarkGrid(settings=(1,), methods=("cudl-dr", "cox"), replications=1, seed=0,
                         **{**FAST, "cudl": {"eta_grid": [-1.0]}})
    res = benchmark_grid(grid)
    bad = res[res["method"] == "cudl-dr"].iloc[0]
    assert bad["status"] == "failed" and "InvalidParameterError" in bad["error"]
    assert res[res["method"] == "cox"]["status"].iloc[0] == "ok"


def test_summaries_and_plotdata():
    res = pd.DataFrame({
        "setting": [1] * 4, "method": ["a", "a", "b", "b"], "target": ["brier"] * 4,
        "n": [500] * 4, "replication": [0, 1, 0, 1], "mse": [1.0, 3.0, 2.0, np.nan],
        "status": ["ok", "ok", "ok", "failed"], "error": ["", "", "", "x"],
    })
    s = summarize(res)
    row = s[s["method"] == "a"].iloc[0]
    assert (row["mean"], row["median"], row["q1"], row["q3"], row["count"]) == (2.0, 2.0, 1.5, 2.5, 2)
    long = plotdata(res)
    assert set(long["statistic"]) == {"q1", "median", "q3", "mean"}
    assert len(long) == 8


def test_grid_validation():
    with pytest.raises(InvalidParameterError):
        BenchmarkGrid(methods=("lasso",))
    with pytest.raises(InvalidParameterError):
        BenchmarkGrid(targets=("auc",))
