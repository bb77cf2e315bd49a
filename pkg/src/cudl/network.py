"""Two-layer feedforward network trained with RMSProp on squared-error objectives.

Architecture: ``ReLU(x W1 + b1)`` with ``d1`` hidden units, inverted dropout
on the hidden layer during training, and a scalar head that is either a
sigmoid (probabilities) or a ReLU (nonnegative means).  The penalty is
``eta * ||theta||^2`` over every weight, biases included.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from .exceptions import DivergenceError, InvalidParameterError

HEADS = ("sigmoid", "relu")


@dataclass
class NetworkConfig:
    """Hyperparameters; defaults follow the usual Keras RMSProp settings."""

    hidden_units: int = 15
    head: str = "sigmoid"
    eta: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    dropout_rate: float = 0.2
    learning_rate: float = 0.001
    rms_decay: float = 0.9
    epsilon: float = 1e-7
    seed: int | None = 0

    def __post_init__(self):
        if self.hidden_units < 1:
            raise InvalidParameterError("hidden_units must be >= 1")
        if self.head not in HEADS:
            raise InvalidParameterError(f"head must be one of {HEADS}, got {self.head!r}")
        if not 0 <= self.dropout_rate < 1:
            raise InvalidParameterError("dropout_rate must lie in [0, 1)")
        if self.eta < 0:
            raise InvalidParameterError("eta must be nonnegative")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidParameterError("epochs must be >= 0 and batch_size >= 1")

    def to_dict(self):
        return asdict(self)


class NetworkWeights:
    """Weights held in one flat vector ``(cols of W1, b1, w2, b2)``.

    ``W1``, ``b1``, ``w2`` are writable views into :attr:`flat`; the flat
    length is ``p * d1 + 2 * d1 + 1``.
    """

    def __init__(self, flat, p, d1):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (p * d1 + 2 * d1 + 1,):
            raise InvalidParameterError(
                f"flat weight vector must have length {p * d1 + 2 * d1 + 1}, got {flat.shape}"
            )
        self.flat = flat
        self.p = p
        self.d1 = d1
        self.W1 = flat[: p * d1].reshape(d1, p).T
        self.b1 = flat[p * d1: p * d1 + d1]
        self.w2 = flat[p * d1 + d1: p * d1 + 2 * d1]

    @property
    def b2(self):
        return self.flat[-1]

    def __len__(self):
        return self.flat.size

    def copy(self):
        return NetworkWeights(self.flat.copy(), self.p, self.d1)

    @classmethod
    def zeros(cls, p, d1):
        return cls(np.zeros(p * d1 + 2 * d1 + 1), p, d1)

    @classmethod
    def from_layers(cls, W1, b1, w2, b2):
        W1 = np.asarray(W1, dtype=float)
        p, d1 = W1.shape
        flat = np.concatenate([W1.T.ravel(), np.ravel(b1), np.ravel(w2), [float(b2)]])
        return cls(flat, p, d1)

    @classmethod
    def glorot(cls, p, d1, rng):
        """Glorot-uniform layer weights, zero biases."""
        w = cls.zeros(p, d1)
        lim1 = np.sqrt(6.0 / (p + d1))
        lim2 = np.sqrt(6.0 / (d1 + 1))
        w.W1[...] = rng.uniform(-lim1, lim1, size=(p, d1))
        w.w2[...] = rng.uniform(-lim2, lim2, size=d1)
        return w

    def to_dict(self):
        return {"p": self.p, "d1": self.d1, "flat": self.flat.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["flat"], dtype=float), d["p"], d["d1"])


def _head(z2, head):
    return expit(z2) if head == "sigmoid" else np.maximum(z2, 0.0)


def _check_dims(weights, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != weights.p:
        raise InvalidParameterError(f"expected {weights.p} covariates, got {X.shape[1]}")
    return X


def forward(weights, X, head, mask=None):
    """Network output for standardized covariates ``X`` (a row or a matrix)."""
    single = np.ndim(X) == 1
    X = _check_dims(weights, X)
    a1 = np.maximum(X @ weights.W1 + weights.b1, 0.0)
    if mask is not None:
        a1 = a1 * mask
    out = _head(a1 @ weights.w2 + weights.b2, head)
    return float(out[0]) if single else out


def _backprop(weights, X, dout, head, mask, grad):
    z1 = X @ weights.W1 + weights.b1
    a1 = np.maximum(z1, 0.0)
    a1d = a1 if mask is None else a1 * mask
    z2 = a1d @ weights.w2 + weights.b2
    out = _head(z2, head)
    return z1, a1d, z2, out


def _fill_gradient(weights, X, z1, a1d, z2, out, dout, head, mask, grad):
    p, d1 = weights.p, weights.d1
    if head == "sigmoid":
        dz2 = dout * out * (1.0 - out)
    else:
        dz2 = dout * (z2 > 0)
    grad[p * d1 + d1: p * d1 + 2 * d1] = a1d.T @ dz2
    grad[-1] = dz2.sum()
    da1 = np.outer(dz2, weights.w2)
    if mask is not None:
        da1 *= mask
    dz1 = da1 * (z1 > 0)
    grad[: p * d1].reshape(d1, p).T[...] = X.T @ dz1
    grad[p * d1: p * d1 + d1] = dz1.sum(axis=0)
    return grad


class SquaredErrorObjective:
    """``mean((y - f)^2)``; with pseudo-responses as ``y`` this is the transformed L2 loss."""

    def __init__(self, targets):
        self.targets = np.asarray(targets, dtype=float)

    def loss(self, pred, idx):
        return float(np.mean((self.targets[idx] - pred) ** 2))

    def grad(self, pred, idx):
        return 2.0 * (pred - self.targets[idx]) / len(pred)


class DoublyRobustObjective:
    """``mean(q - 2 D f + f^2)`` with ``q = a_2+b_2-c_2`` and ``D = a_1+b_1-c_1``.

    The doubly robust squared-error loss after using ``a_0+b_0-c_0 = 1``.
    """

    def __init__(self, quadratic, linear):
        self.quadratic = np.asarray(quadratic, dtype=float)
        self.linear = np.asarray(linear, dtype=float)

    def loss(self, pred, idx):
        return float(np.mean(self.quadratic[idx] - 2.0 * self.linear[idx] * pred + pred**2))

    def grad(self, pred, idx):
        return (2.0 * pred - 2.0 * self.linear[idx]) / len(pred)


def _as_objective(y):
    return y if hasattr(y, "grad") else SquaredErrorObjective(y)


def penalized_loss(weights, X, y, eta, head, mask=None):
    """Mean objective over the batch plus ``eta * ||theta||^2``."""
    X = _check_dims(weights, X)
    obj = _as_objective(y)
    idx = np.arange(X.shape[0])
    return obj.loss(forward(weights, X, head, mask), idx) + eta * float(weights.flat @ weights.flat)


def gradient(weights, X, y, eta, head, mask=None):
    """Flat gradient of :func:`penalized_loss` by backpropagation.

    The ReLU subgradient at exactly zero is taken as 0.
    """
    X = _check_dims(weights, X)
    obj = _as_objective(y)
    idx = np.arange(X.shape[0])
    z1, a1d, z2, out = _backprop(weights, X, None, head, mask, None)
    grad = np.empty_like(weights.flat)
    _fill_gradient(weights, X, z1, a1d, z2, out, obj.grad(out, idx), head, mask, grad)
    grad += 2.0 * eta * weights.flat
    return grad


def train(X, y, config, init=None, history=None):
    """Fit the network by mini-batch RMSProp.

    Parameters
    ----------
    X : array of shape (n, p)
        Standardized covariates.
    y : array of shape (n,) or objective
        Pseudo-responses, or an object with ``loss``/``grad`` methods.
    config : NetworkConfig
    init : NetworkWeights, optional
        Starting weights; Glorot initialization from ``config.seed`` otherwise.
    history : list, optional
        Receives the full-data penalized loss (no dropout) before training
        and after every epoch.

    Returns
    -------
    NetworkWeights
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n == 0:
        raise InvalidParameterError("cannot train on an empty dataset")
    obj = _as_objective(y)
    rng = np.random.default_rng(config.seed)
    d1, head, eta = config.hidden_units, config.head, config.eta
    weights = init.copy() if init is not None else NetworkWeights.glorot(p, d1, rng)
    theta = weights.flat
    v = np.zeros_like(theta)
    grad = np.empty_like(theta)
    lr, rho, eps = config.learning_rate, config.rms_decay, config.epsilon
    rate = config.dropout_rate
    keep_scale = 1.0 / (1.0 - rate)
    full_batch = config.batch_size >= n
    all_idx = np.arange(n)

    def full_loss():
        return obj.loss(forward(weights, X, head), all_idx) + eta * float(theta @ theta)

    if history is not None:
        history.append(full_loss())
    for epoch in range(config.epochs):
        order = all_idx if full_batch else rng.permutation(n)
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start: start + config.batch_size]
            Xb = X[idx]
            mask = None
            if rate > 0:
                mask = (rng.random((idx.size, d1)) >= rate) * keep_scale
            z1, a1d, z2, out = _backprop(weights, Xb, None, head, mask, None)
            loss = obj.loss(out, idx)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, bi, loss)
            _fill_gradient(weights, Xb, z1, a1d, z2, out, obj.grad(out, idx), head, mask, grad)
            grad += 2.0 * eta * theta
            v *= rho
            v += (1.0 - rho) * grad * grad
            theta -= lr * grad / (np.sqrt(v) + eps)
        if history is not None:
            history.append(full_loss())
    if not np.all(np.isfinite(theta)):
        raise DivergenceError(config.epochs - 1, -1, float("nan"))
    return weights


def predict(weights, standardizer, raw_covariates, head):
    """Standardize raw covariates, then run the network without dropout."""
    single = np.ndim(raw_covariates) == 1
    X = np.atleast_2d(np.asarray(raw_covariates, dtype=float))
    Z = standardizer.transform(X) if standardizer is not None else X
    out = forward(weights, Z, head)
    return float(out[0]) if single else out
