import numpy as np
import pytest

import oracles
from conftest import RowCurves, indexed, random_curve
from cudl.curves import StepSurvivalCurve, m_k
from cudl.data import Dataset
from cudl.estimators import CensoringTree, RandomSurvivalForest, UnitCurveModel
from cudl.exceptions import InvalidParameterError, InvalidPredictionError
from cudl.losses import (
    bj_loss,
    censored_brier,
    dr_loss,
    full_l2,
    ipcw_loss,
    transformed_l2,
)
from cudl.simulation import SettingConfig, simulate
from cudl.transforms import Identity, RestrictedTime, SurvivalIndicator, pseudo_responses

ID = Identity()


def test_full_l2_examples():
    assert full_l2([1, 2], [1, 2]).value == 0
    assert full_l2([0, 2], [1, 1]).value == 1
    assert full_l2([3], [0]).value == 9
    with pytest.raises(InvalidParameterError):
        full_l2([1, 2], [1])


def test_ipcw_examples():
    d = indexed([1.0, 2.0], [1, 0])
    g = RowCurves([StepSurvivalCurve([0.5], [0.5]), StepSurvivalCurve.unit()])
    assert ipcw_loss(d, [0.0, 7.0], g, ID).value == pytest.approx(1.0)
    assert ipcw_loss(indexed([1.0, 2.0], [0, 0]), [5.0, 5.0], g, ID).value == 0.0
    full = indexed([1.0, 2.0, 4.0], [1, 1, 1])
    assert ipcw_loss(full, 0.5, None, ID).value == full_l2(full.time, [0.5] * 3).value


def hand_instance(rng, n=3):
    times = rng.uniform(0.2, 4.0, n)
    events = np.array([1, 0, 0, 1, 0][:n])
    gs, ss = [], []
    for t in times:
        g = random_curve(rng)
        while not g.eval(t) > 0:
            g = random_curve(rng)
        gs.append(g)
        s = random_curve(rng, complete=True, t_max=8.0)
        while not s.eval(t) > 0:
            s = random_curve(rng, complete=True, t_max=8.0)
        ss.append(s)
    return times, events, gs, ss


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("h, h_ref", [(ID, oracles.identity), (RestrictedTime(2.0), oracles.capped(2.0))])
def test_dr_and_bj_match_brute_force(seed, h, h_ref):
    rng = np.random.default_rng(seed)
    times, events, gs, ss = hand_instance(rng)
    d = indexed(times, events)
    beta = rng.normal(size=3)
    ref = oracles.dr_loss(times, events, beta, gs, ss, h_ref)
    got = dr_loss(d, beta, RowCurves(gs), RowCurves(ss), h).value
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-12)
    ref_bj = oracles.bj_loss(times, events, beta, ss, h_ref)
    assert bj_loss(d, beta, RowCurves(ss), h).value == pytest.approx(ref_bj, rel=1e-12, abs=1e-12)


def test_dr_with_unit_g_is_bj():
    d, _ = simulate(SettingConfig(1, 100, 30, seed=4))
    s = RandomSurvivalForest(n_estimators=5, random_state=1).fit(d.covariates, d.y)
    beta = np.linspace(0, 1, 100)
    h = RestrictedTime(1.0)
    a = dr_loss(d, beta, UnitCurveModel(), s, h).value
    b = bj_loss(d, beta, s, h).value
    assert a == pytest.approx(b, rel=1e-13)


def test_bj_single_censored_row_at_zero_prediction():
    s = StepSurvivalCurve([1.0, 3.0], [0.5, 0.0])
    d = indexed([0.5], [0])
    assert bj_loss(d, [0.0], RowCurves([s]), ID).value == pytest.approx(m_k(s, 0.5, 2))


def test_reductions_without_censoring(rng):
    n = 60
    d = Dataset(rng.exponential(size=n), np.ones(n, dtype=int), rng.normal(size=(n, 2)))
    g = CensoringTree(min_leaf=10).fit(d.covariates, d.y)
    s = RandomSurvivalForest(n_estimators=3, random_state=0).fit(d.covariates, d.y)
    beta = rng.normal(size=n)
    h = RestrictedTime(1.5)
    full = full_l2(h(d.time), beta).value
    D = pseudo_responses(d, g, s, h)
    for v in (ipcw_loss(d, beta, g, h).value, dr_loss(d, beta, g, s, h).value,
              bj_loss(d, beta, s, h).value, transformed_l2(D, beta).value):
        assert abs(v - full) < 1e-12


def test_dr_minus_transformed_is_constant():
    d, _ = simulate(SettingConfig(2, 120, 30, seed=5))
    g = CensoringTree().fit(d.covariates, d.y)
    s = RandomSurvivalForest(n_estimators=5, random_state=0).fit(d.covariates, d.y)
    h = RestrictedTime(3.0)
    D = pseudo_responses(d, g, s, h)
    rng = np.random.default_rng(0)
    diffs = [dr_loss(d, b, g, s, h).value - transformed_l2(D, b).value
             for b in [np.zeros(120), np.ones(120), *rng.uniform(0, 3, (10, 120))]]
    assert np.ptp(diffs) < 1e-9
    assert transformed_l2(D, D).value == 0.0


def test_censored_brier_examples():
    d = indexed([1.0, 2.0, 3.0], [1, 1, 1])
    t = 1.5
    truth = (d.time >= t).astype(float)
    assert censored_brier(d, truth, None, t).value == 0.0
    assert censored_brier(d, 0.5, None, t).value == 0.25
    # one row censored before t contributes zero, one observed past t
    d2 = indexed([1.0, 5.0], [0, 1])
    g = RowCurves([StepSurvivalCurve.unit(), StepSurvivalCurve([2.0], [0.8])])
    assert censored_brier(d2, [0.3, 0.8], g, 5.0).value == pytest.approx((0.2**2 / 0.8) / 2)
    with pytest.raises(InvalidPredictionError):
        censored_brier(d, [0.5, 1.2, 0.5], None, t)


def test_ipcw_unbiased_with_true_censoring_curve():
    """Monte Carlo: IPCW risk with the true G matches the analytic full-data risk."""
    from numpy.polynomial.hermite_e import hermegauss

    from cudl.estimators import KaplanMeier
    from cudl.simulation import covariance

    tau, beta = 1.0, 0.5
    d, _ = simulate(SettingConfig(1, 20000, 30, seed=8))
    grid = np.linspace(tau / 4000, 4 * tau, 16000)
    g_model = KaplanMeier()
    g_model.curve_ = StepSurvivalCurve(grid, np.exp(-grid / 1.14))
    h = RestrictedTime(tau)
    # per-row contributions so we can form a standard error
    from cudl.data import restrict_rms

    dr = restrict_rms(d, tau)
    g_at = g_model.curve_.eval(dr.time)
    contrib = dr.event * (h(dr.time) - beta) ** 2 / g_at
    assert ipcw_loss(dr, beta, g_model, h).value == pytest.approx(contrib.mean(), rel=1e-12)
    sigma = np.sqrt(0.01 * covariance(30)[:10, :10].sum())
    x, w = hermegauss(80)
    mu = np.exp(sigma * x)
    e1 = mu * (1 - np.exp(-tau / mu))
    e2 = 2 * mu**2 * (1 - np.exp(-tau / mu) * (1 + tau / mu))
    risk = float(np.sum(w * (e2 - 2 * beta * e1 + beta**2)) / np.sqrt(2 * np.pi))
    se = contrib.std(ddof=1) / np.sqrt(dr.n)
    assert abs(contrib.mean() - risk) < 3 * se
