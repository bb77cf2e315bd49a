"""Regularized incomplete gamma functions (series / continued fraction)."""

import math

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _series_p(a, x):
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
    term = total = 1.0 / a
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _continued_fraction_q(a, x):
    # modified Lentz evaluation of the Legendre continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    f = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        f *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return f * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gammaincc_scalar(a, x):
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a!r}")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _series_p(a, x)
    return _continued_fraction_q(a, x)


def gammaincc(a, x):
    """Regularized upper incomplete gamma ``Q(a, x) = Gamma(a, x) / Gamma(a)``."""
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    out = np.array([_gammaincc_scalar(ai, xi) for ai, xi in zip(a.ravel(), x.ravel())])
    out = out.reshape(a.shape)
    return out if out.ndim else float(out)


def gammainc(a, x):
    """Regularized lower incomplete gamma ``P(a, x) = 1 - Q(a, x)``."""
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    out = np.empty(a.size)
    for i, (ai, xi) in enumerate(zip(a.ravel(), x.ravel())):
        if xi <= 0:
            out[i] = 0.0
        elif xi < ai + 1.0:
            out[i] = _series_p(ai, xi)
        else:
            out[i] = 1.0 - _continued_fraction_q(ai, xi)
    out = out.reshape(a.shape)
    return out if out.ndim else float(out)
