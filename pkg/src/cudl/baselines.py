"""Comparison models: main-effects Cox regression and random survival forest wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .curves import StepSurvivalCurve, restricted_mean_from_curve
from .data import check_survival_y
from .exceptions import ConvergenceError, InsufficientDataError, SeparationError


def _risk_set_end(time):
    """Order by decreasing time and, per row, the last sorted position with time >= its own."""
    order = np.argsort(-time, kind="stable")
    ts = time[order]
    end = np.searchsorted(-ts, -time, side="right") - 1
    return order, end


def _partial_likelihood(X, time, event, beta, order, end, derivatives=True):
    """Breslow log partial likelihood, score and information."""
    eta = X @ beta
    shift = eta.max() if eta.size else 0.0
    r = np.exp(eta - shift)
    Xs, rs = X[order], r[order]
    s0 = np.cumsum(rs)[end]
    ev = event == 1
    loglik = float(np.sum(eta[ev] - shift - np.log(s0[ev])))
    if not derivatives:
        return loglik, None, None
    s1 = np.cumsum(rs[:, None] * Xs, axis=0)[end]
    xbar = s1[ev] / s0[ev, None]
    score = (X[ev] - xbar).sum(axis=0)
    s2 = np.cumsum(rs[:, None, None] * Xs[:, :, None] * Xs[:, None, :], axis=0)[end]
    info = (s2[ev] / s0[ev, None, None]).sum(axis=0) - xbar.T @ xbar
    return loglik, score, info


def log_partial_likelihood(X, time, event, beta):
    X = np.asarray(X, dtype=float).reshape(len(time), -1)
    order, end = _risk_set_end(np.asarray(time, dtype=float))
    return _partial_likelihood(X, time, np.asarray(event), np.asarray(beta, dtype=float),
                               order, end, derivatives=False)[0]


class CoxPHSurvival(BaseEstimator):
    """Main-effects Cox proportional hazards model.

    Newton-Raphson on the Breslow partial likelihood with step halving,
    followed by the Breslow baseline cumulative hazard.

    Parameters
    ----------
    max_iter : int, default=50
    tol : float, default=1e-8
        Convergence threshold on the max-norm of the score.
    max_coef : float, default=50
        Coefficients beyond this magnitude signal a monotone likelihood.
    """

    def __init__(self, max_iter=50, tol=1e-8, max_coef=50.0):
        self.max_iter = max_iter
        self.tol = tol
        self.max_coef = max_coef

    def fit(self, X, y):
        X = check_array(X, dtype=float, ensure_min_features=0)
        time, event = check_survival_y(y)
        if event.sum() == 0:
            raise InsufficientDataError("Cox model needs at least one event")
        n, p = X.shape
        order, end = _risk_set_end(time)
        beta = np.zeros(p)
        loglik, score, info = _partial_likelihood(X, time, event, beta, order, end)
        self.loglik_null_ = loglik
        n_iter = 0
        while p and np.max(np.abs(score)) >= self.tol:
            if n_iter >= self.max_iter:
                raise ConvergenceError(
                    f"Cox fit did not converge in {self.max_iter} iterations "
                    f"(score max-norm {np.max(np.abs(score)):.3g}, loglik {loglik:.6g})"
                )
            n_iter += 1
            try:
                step = np.linalg.solve(info, score)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(info, score, rcond=None)[0]
            for _ in range(40):
                cand = beta + step
                new_ll, new_score, new_info = _partial_likelihood(X, time, event, cand, order, end)
                if new_ll >= loglik - 1e-12 * abs(loglik):
                    break
                step = step / 2.0
            else:
                break  # step halving exhausted
            beta, loglik, score, info = cand, new_ll, new_score, new_info
            if np.max(np.abs(beta)) > self.max_coef:
                raise SeparationError(
                    f"coefficient magnitude {np.max(np.abs(beta)):.3g} exceeds {self.max_coef}; "
                    "the partial likelihood looks monotone (separation)"
                )
        self.coef_ = beta
        self.loglik_ = loglik
        self.n_iter_ = n_iter
        self.score_norm_ = float(np.max(np.abs(score))) if p else 0.0
        self.n_features_in_ = p
        # Breslow baseline cumulative hazard at distinct event times
        r = np.exp(X @ beta)
        u = np.unique(time[event == 1])
        d = np.bincount(np.searchsorted(u, time[event == 1]), minlength=u.size)
        srt = np.argsort(time, kind="stable")
        tail = np.concatenate((np.cumsum(r[srt][::-1])[::-1], [0.0]))
        at_risk = tail[np.searchsorted(time[srt], u, side="left")]
        self.baseline_times_ = u
        self.baseline_cumhaz_ = np.cumsum(d / at_risk)
        return self

    def _linear_predictor(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(np.atleast_2d(X), dtype=float, ensure_min_features=0)
        return X @ self.coef_

    def predict_curves(self, X):
        lp = self._linear_predictor(X)
        return [StepSurvivalCurve(self.baseline_times_, np.exp(-self.baseline_cumhaz_ * np.exp(e)))
                for e in lp]

    def predict_survival(self, X, t):
        """``S(t | w) = exp(-H0(t) exp(w'beta))``."""
        return np.exp(-self.baseline_cumhaz(t) * np.exp(self._linear_predictor(X)))

    def baseline_cumhaz(self, t):
        check_is_fitted(self, "coef_")
        idx = np.searchsorted(self.baseline_times_, t, side="right")
        return np.concatenate(([0.0], self.baseline_cumhaz_))[idx]

    def predict_rms(self, X, tau):
        return np.array([restricted_mean_from_curve(c, tau) for c in self.predict_curves(X)])

    def to_dict(self):
        check_is_fitted(self, "coef_")
        return {
            "type": "cox",
            "params": self.get_params(),
            "coef": self.coef_.tolist(),
            "baseline_times": self.baseline_times_.tolist(),
            "baseline_cumhaz": self.baseline_cumhaz_.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(**d["params"])
        m.coef_ = np.asarray(d["coef"], dtype=float)
        m.n_features_in_ = m.coef_.size
        m.baseline_times_ = np.asarray(d["baseline_times"], dtype=float)
        m.baseline_cumhaz_ = np.asarray(d["baseline_cumhaz"], dtype=float)
        return m


def cox_fit(data, max_iter=50, tol=1e-8):
    return CoxPHSurvival(max_iter=max_iter, tol=tol).fit(data.covariates, data.y)


def cox_predict_survival(model, w, t):
    return float(model.predict_survival(np.atleast_2d(w), t)[0])


def cox_predict_rms(model, w, tau):
    return float(model.predict_rms(np.atleast_2d(w), tau)[0])


def rsf_predict_survival(forest, w, t):
    return float(forest.predict_survival(np.atleast_2d(w), t)[0])


def rsf_predict_rms(forest, w, tau):
    return float(forest.predict_rms(np.atleast_2d(w), tau)[0])
