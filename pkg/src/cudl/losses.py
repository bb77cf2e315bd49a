"""Empirical risk estimates for censored outcomes under squared-error loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import ConditionalMoments
from .estimators import UnitCurveModel
from .exceptions import InvalidParameterError, InvalidPredictionError, PositivityError
from .transforms import SurvivalIndicator, TransformedRows, dataset_terms


@dataclass(frozen=True)
class LossValue:
    value: float
    n: int

    def __float__(self):
        return self.value


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size == 0:
        raise InvalidParameterError(f"length mismatch or empty input: {a.size} vs {b.size}")
    return a, b


def _predictions(data, predictions):
    beta = np.broadcast_to(np.asarray(predictions, dtype=float), (data.n,)).copy()
    return beta


def full_l2(responses, predictions):
    r, p = _pair(responses, predictions)
    return LossValue(float(np.mean((r - p) ** 2)), r.size)


def _g_at_times(data, g_model, rows):
    curves = (g_model or UnitCurveModel()).predict_curves(data.covariates[rows])
    g = np.array([c.eval(t) for c, t in zip(curves, data.time[rows])])
    bad = np.flatnonzero(~(g > 0))
    if bad.size:
        raise PositivityError(int(rows[bad[0]]), g[bad[0]])
    return g


def ipcw_loss(data, predictions, g_model, h):
    """``n^-1 sum delta_i (h(T~_i) - beta_i)^2 / G(T~_i | W_i)``."""
    beta = _predictions(data, predictions)
    rows = np.flatnonzero(data.event == 1)
    contrib = np.zeros(data.n)
    if rows.size:
        g = _g_at_times(data, g_model, rows)
        contrib[rows] = (h(data.time[rows]) - beta[rows]) ** 2 / g
    return LossValue(float(np.mean(contrib)), data.n)


def dr_loss(data, predictions, g_model, s_model, h, terms=None):
    """Doubly robust (augmented IPCW) squared-error risk.

    Expanding ``(h(T) - beta)^2`` in powers of ``beta`` writes the IPCW
    part plus augmentation as
    ``n^-1 sum (a_2+b_2-c_2) - 2 beta (a_1+b_1-c_1) + beta^2 (a_0+b_0-c_0)``.
    ``g_model=None`` uses ``G = 1``.
    """
    beta = _predictions(data, predictions)
    if terms is None:
        terms = dataset_terms(data, g_model, s_model, h)
    per_row = terms.combined(2) - 2.0 * beta * terms.combined(1) + beta**2 * terms.combined(0)
    return LossValue(float(np.mean(per_row)), data.n)


def bj_loss(data, predictions, s_model, h):
    """Buckley-James risk: censored rows contribute ``E_S[(h(T) - beta)^2 | T >= C]``."""
    beta = _predictions(data, predictions)
    s_curves = s_model.predict_curves(data.covariates)
    contrib = np.empty(data.n)
    for i in range(data.n):
        t = data.time[i]
        if data.event[i]:
            contrib[i] = (float(h(t)) - beta[i]) ** 2
        else:
            m = ConditionalMoments(s_curves[i], h)
            tt = np.array([t])
            contrib[i] = m(tt, 2)[0] - 2 * beta[i] * m(tt, 1)[0] + beta[i] ** 2
    return LossValue(float(np.mean(contrib)), data.n)


def transformed_l2(rows, predictions):
    """Mean squared pseudo-response residual ``n^-1 sum (D_i - beta_i)^2``."""
    d = rows.pseudo_response if isinstance(rows, TransformedRows) else rows
    return full_l2(d, predictions)


def censored_brier(data_t, predictions, g_model, t):
    """Censored-data Brier score on a dataset already restricted at ``t``.

    ``n^-1 sum delta_i(t) (1{T~_i >= t} - beta_i)^2 / G(T~_i(t) | W_i)``.
    """
    beta = _predictions(data_t, predictions)
    bad = np.flatnonzero(~((beta >= 0) & (beta <= 1)))
    if bad.size:
        raise InvalidPredictionError(
            f"prediction {beta[bad[0]]!r} at row {bad[0]} lies outside [0, 1]"
        )
    return ipcw_loss(data_t, beta, g_model, SurvivalIndicator(t))
