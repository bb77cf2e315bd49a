"""Censoring unbiased response transformation.

For an observation ``(T~, delta, W)`` with censoring curve ``G`` and
failure-time curve ``S`` (both conditional on ``W``)::

    a_k = delta h(T~)^k / G(T~)
    b_k = (1 - delta) m_k(T~; S) / G(T~)
    c_k = sum_{u_j <= T~} m_k(u_j; S) dLambda_G(u_j) / G(u_j)

and the pseudo-response is ``D = a_1 + b_1 - c_1``.  With the hazard
increments taken against the left limit of ``G`` the sum telescopes, so
``a_0 + b_0 - c_0 = 1`` holds to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import ConditionalMoments, hazard_increments
from .data import Dataset, Standardizer
from .estimators import UnitCurveModel
from .exceptions import PositivityError


class Identity:
    """``h(t) = t``."""

    def __call__(self, t):
        return np.asarray(t, dtype=float)

    def __repr__(self):
        return "Identity()"


class RestrictedTime:
    """``h(t) = min(t, tau)``: the restricted mean survival outcome."""

    def __init__(self, tau):
        self.tau = float(tau)

    def __call__(self, t):
        return np.minimum(np.asarray(t, dtype=float), self.tau)

    def __repr__(self):
        return f"RestrictedTime(tau={self.tau!r})"


class SurvivalIndicator:
    """``h(t) = 1{t >= t0}``: the survival-probability (Brier) outcome."""

    def __init__(self, t):
        self.t = float(t)

    def __call__(self, u):
        return (np.asarray(u, dtype=float) >= self.t).astype(float)

    def __repr__(self):
        return f"SurvivalIndicator(t={self.t!r})"


def _terms_from_curves(time, event, g_curve, s_moments, ks, h, index=None):
    g_t = g_curve.eval(time)
    if not g_t > 0:
        raise PositivityError(index, g_t)
    u, dlam = hazard_increments(g_curve)
    keep = u <= time  # closed upper limit of the path integral
    u, dlam = u[keep], dlam[keep]
    g_u = g_curve.values[: u.size] if u.size else np.empty(0)
    # hazard_increments drops jumps with G(u-) = 0; none occur before T~ when G(T~) > 0
    weight = dlam / g_u
    out = {}
    for k in ks:
        if k == 0:
            hk = 1.0
        else:
            hk = float(h(time)) ** k
        a = event * hk / g_t
        b = 0.0
        if not event:
            b = float(s_moments(np.array([time]), k)[0]) / g_t
        c = float(np.sum(s_moments(u, k) * weight)) if u.size else 0.0
        out[k] = (a, b, c)
    return out


def compute_terms(obs, g_curve, s_curve, h, k, index=None):
    """``(a_k, b_k, c_k)`` for one observation.

    Raises
    ------
    PositivityError
        If ``G(T~) <= 0``; ``index`` is reported in the message.
    """
    moments = ConditionalMoments(s_curve, h)
    return _terms_from_curves(float(obs.time), int(obs.event), g_curve, moments, (k,), h,
                              index)[k]


@dataclass(frozen=True)
class TransformTerms:
    """Per-observation ``a_k, b_k, c_k`` stacked as arrays of shape (3, n) for k = 0, 1, 2."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def combined(self, k):
        """``a_k + b_k - c_k``."""
        return self.a[k] + self.b[k] - self.c[k]

    @property
    def pseudo_response(self):
        return self.combined(1)


def _curves(model, X):
    if model is None:
        model = UnitCurveModel()
    return model.predict_curves(X)


def dataset_terms(data, g_model, s_model, h, ks=(0, 1, 2)):
    """All transformation terms for every row of ``data``.

    ``g_model=None`` (or a :class:`UnitCurveModel`) gives ``G = 1``.
    """
    g_curves = _curves(g_model, data.covariates)
    s_curves = s_model.predict_curves(data.covariates)
    a = np.zeros((3, data.n))
    b = np.zeros((3, data.n))
    c = np.zeros((3, data.n))
    moment_cache = {}
    for i in range(data.n):
        key = id(s_curves[i])
        if key not in moment_cache:
            moment_cache[key] = (s_curves[i], ConditionalMoments(s_curves[i], h))
        terms = _terms_from_curves(float(data.time[i]), int(data.event[i]), g_curves[i],
                                   moment_cache[key][1], ks, h, index=i)
        for k, (ak, bk, ck) in terms.items():
            a[k, i], b[k, i], c[k, i] = ak, bk, ck
    return TransformTerms(a, b, c)


def pseudo_responses(data, g_model, s_model, h):
    """``D(O_i; G, S)`` for every row."""
    return dataset_terms(data, g_model, s_model, h, ks=(1,)).pseudo_response


@dataclass(frozen=True)
class TransformedRows:
    """Pseudo-responses with standardized covariates: input for any L2 learner."""

    pseudo_response: np.ndarray
    covariates: np.ndarray

    def __len__(self):
        return len(self.pseudo_response)


def transform_dataset(data: Dataset, g_model, s_model, h, standardizer: Standardizer | None = None):
    """Build ``{(D(O_i; G, S), W_i)}``; ``g_model=None`` gives the Buckley-James transform."""
    d = pseudo_responses(data, g_model, s_model, h)
    cov = data.covariates if standardizer is None else standardizer.transform(data.covariates)
    return TransformedRows(d, cov)
