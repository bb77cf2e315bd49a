"""Right-continuous step survival curves and the integrals built on them.

A curve is stored as strictly increasing jump times ``u_1 < ... < u_J`` with
post-jump values ``S(u_j)``; ``S(u) = 1`` before the first jump.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateConditioningError, InvalidParameterError

_MONO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StepSurvivalCurve:
    jump_times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.jump_times, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        if t.shape != v.shape:
            raise InvalidParameterError("jump_times and values must have equal length")
        if t.size:
            if np.any(np.diff(t) <= 0) or t[0] <= 0:
                raise InvalidParameterError("jump times must be positive and strictly increasing")
            if np.any(np.diff(v) > _MONO_TOL) or v[0] > 1 + _MONO_TOL or v[-1] < -_MONO_TOL:
                raise InvalidParameterError("curve values must be nonincreasing within [0, 1]")
            v = np.clip(np.minimum.accumulate(v), 0.0, 1.0)
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "jump_times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.jump_times.size

    def __eq__(self, other):
        if not isinstance(other, StepSurvivalCurve):
            return NotImplemented
        return np.array_equal(self.jump_times, other.jump_times) and np.array_equal(
            self.values, other.values
        )

    __hash__ = None

    @classmethod
    def unit(cls):
        """The curve ``S = 1`` with no jumps."""
        return cls(np.empty(0), np.empty(0))

    @property
    def left_values(self):
        """``S(u_j-)`` for every jump."""
        if not len(self):
            return np.empty(0)
        return np.concatenate(([1.0], self.values[:-1]))

    @property
    def masses(self):
        return self.left_values - self.values

    def __call__(self, u):
        return self.eval(u)

    def eval(self, u):
        """Right-continuous value ``S(u)``; vectorized over ``u``."""
        idx = np.searchsorted(self.jump_times, u, side="right")
        out = np.concatenate(([1.0], self.values))[idx]
        return out if np.ndim(out) else float(out)

    def eval_left(self, u):
        """Left limit ``S(u-)``."""
        idx = np.searchsorted(self.jump_times, u, side="left")
        out = np.concatenate(([1.0], self.values))[idx]
        return out if np.ndim(out) else float(out)

    def completed(self):
        """Copy whose residual mass ``S(u_J)`` is moved onto the last jump."""
        if not len(self) or self.values[-1] == 0.0:
            return self
        v = self.values.copy()
        v[-1] = 0.0
        return StepSurvivalCurve(self.jump_times, v)

    def to_dict(self):
        return {"jump_times": self.jump_times.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["jump_times"], d["values"])


def eval_curve(curve, u):
    return curve.eval(u)


def eval_left(curve, u):
    return curve.eval_left(u)


def _identity(t):
    return t


class ConditionalMoments:
    """Precomputed tail sums for repeated evaluation of :func:`m_k` on one curve."""

    def __init__(self, curve, h=None):
        self.curve = curve
        self.h = h or _identity
        done = curve.completed()
        self._masses = done.masses
        self._h_atoms = np.asarray(self.h(curve.jump_times), dtype=float)
        self._tails = {}

    def _tail(self, k):
        if k not in self._tails:
            w = self._h_atoms**k * self._masses
            # tail[i] = sum of atoms with index >= i
            self._tails[k] = np.concatenate((np.cumsum(w[::-1])[::-1], [0.0]))
        return self._tails[k]

    def __call__(self, u, k):
        """``E_S[h(T)^k | T >= u]`` at each ``u`` (vectorized)."""
        u = np.asarray(u, dtype=float)
        if k == 0:
            return np.ones_like(u)
        curve = self.curve
        idx = np.searchsorted(curve.jump_times, u, side="right")
        denom = np.concatenate(([1.0], curve.values))[idx]
        if np.any(denom <= 0):
            bad = u[denom <= 0].ravel()[0]
            raise DegenerateConditioningError(
                f"survival curve is zero at u={bad!r}; conditional moment undefined"
            )
        has_atoms = idx < len(curve)
        out = np.empty_like(u)
        out[has_atoms] = self._tail(k)[idx[has_atoms]] / denom[has_atoms]
        # nothing beyond u: the surviving mass sits at u itself
        beyond = ~has_atoms
        out[beyond] = np.asarray(self.h(u[beyond]), dtype=float) ** k
        return out


def m_k(curve, u, k, h=None):
    """Conditional tail moment ``E_S[h(T)^k | T >= u]`` of a step curve.

    Sums ``h(u_j)^k (S(u_j-) - S(u_j)) / S(u)`` over atoms strictly after
    ``u``.  A curve that does not reach zero is completed by placing its
    residual mass on the last jump.  ``m_0`` is identically one.

    Raises
    ------
    DegenerateConditioningError
        If ``S(u) = 0``.
    """
    if k not in (0, 1, 2):
        raise InvalidParameterError(f"k must be 0, 1 or 2, got {k!r}")
    out = ConditionalMoments(curve, h)(np.asarray(u, dtype=float), k)
    return out if np.ndim(out) else float(out)


def hazard_increments(curve):
    """Cumulative-hazard jumps ``(G(u_j-) - G(u_j)) / G(u_j-)``.

    Returns ``(times, increments)``; jumps with ``G(u_j-) = 0`` are dropped.
    """
    left = curve.left_values
    keep = left > 0
    return curve.jump_times[keep], (left[keep] - curve.values[keep]) / left[keep]


def restricted_mean_from_curve(curve, tau):
    """``E[min(T, tau)]`` under the curve; residual mass counts at ``tau``."""
    if not tau > 0:
        raise InvalidParameterError(f"tau must be positive, got {tau!r}")
    if not len(curve):
        return float(tau)
    total = np.sum(np.minimum(curve.jump_times, tau) * curve.masses) + tau * curve.values[-1]
    return float(total)


def survival_from_cumhaz(times, cumhaz):
    """Step survival curve ``exp(-H)`` from cumulative hazard values at jump times."""
    return StepSurvivalCurve(times, np.exp(-np.asarray(cumhaz, dtype=float)))
