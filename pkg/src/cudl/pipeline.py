"""End-to-end censoring unbiased deep learning.

1. restrict the data at the horizon (``t`` for survival probabilities,
   ``tau`` for restricted means);
2. fit the censoring tree (doubly robust only) and the survival forest;
3. build pseudo-responses ``D(O_i; G, S)``;
4. choose the penalty by K-fold cross-validation of the squared
   pseudo-response error on held-out rows;
5. refit the network on every row at the chosen penalty.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._seeding import derive_seed
from .data import Dataset, Standardizer, restrict_brier, restrict_rms
from .estimators import CensoringTree, RandomSurvivalForest
from .exceptions import InvalidParameterError
from .network import (
    DoublyRobustObjective,
    NetworkConfig,
    NetworkWeights,
    SquaredErrorObjective,
    forward,
    train,
)
from .transforms import RestrictedTime, SurvivalIndicator, dataset_terms

VARIANTS = ("doubly_robust", "buckley_james")
_VARIANT_ALIASES = {"dr": "doubly_robust", "bj": "buckley_james"}
OBJECTIVES = ("transformed_l2", "dr_decomposed")

DEFAULT_FOREST = {"n_estimators": 100, "max_features": "sqrt", "min_samples_leaf": 15,
                  "nsplit": 10}
DEFAULT_TREE = {"min_leaf": 30, "trunc_frac": 0.10, "max_depth": 10, "min_logrank": 0.1}


@dataclass(frozen=True)
class Target:
    """Prediction target: ``brier`` gives ``P(T >= t | W)``, ``rms`` gives ``E[min(T, tau) | W]``."""

    kind: str
    horizon: float

    def __post_init__(self):
        if self.kind not in ("brier", "rms"):
            raise InvalidParameterError(f"target must be 'brier' or 'rms', got {self.kind!r}")
        if not self.horizon > 0:
            raise InvalidParameterError(f"target horizon must be positive, got {self.horizon!r}")

    @classmethod
    def parse(cls, text):
        """Parse ``"brier:T"`` or ``"rms:TAU"``."""
        kind, sep, value = str(text).partition(":")
        if not sep:
            raise InvalidParameterError(f"target must look like 'brier:T' or 'rms:TAU', got {text!r}")
        try:
            horizon = float(value)
        except ValueError:
            raise InvalidParameterError(f"invalid target horizon {value!r}") from None
        return cls(kind.strip(), horizon)

    def __str__(self):
        return f"{self.kind}:{self.horizon!r}"

    @property
    def h(self):
        return SurvivalIndicator(self.horizon) if self.kind == "brier" else RestrictedTime(self.horizon)

    @property
    def head(self):
        return "sigmoid" if self.kind == "brier" else "relu"

    def restrict(self, data):
        return (restrict_brier if self.kind == "brier" else restrict_rms)(data, self.horizon)


@dataclass(frozen=True)
class CudlSpec:
    target: Target
    variant: str = "doubly_robust"
    eta_grid: tuple = (0.0, 0.001, 0.01, 0.1)
    cv_folds: int = 5
    network: NetworkConfig = field(default_factory=NetworkConfig)
    forest: dict = field(default_factory=lambda: dict(DEFAULT_FOREST))
    tree: dict = field(default_factory=lambda: dict(DEFAULT_TREE))
    refit_nuisance_per_fold: bool = False
    objective: str = "transformed_l2"
    seed: int = 0

    def __post_init__(self):
        variant = _VARIANT_ALIASES.get(self.variant, self.variant)
        if variant not in VARIANTS:
            raise InvalidParameterError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        object.__setattr__(self, "variant", variant)
        if isinstance(self.target, str):
            object.__setattr__(self, "target", Target.parse(self.target))
        grid = tuple(float(e) for e in self.eta_grid)
        if not grid or any(e < 0 for e in grid):
            raise InvalidParameterError("eta_grid must be a nonempty sequence of nonnegative values")
        object.__setattr__(self, "eta_grid", grid)
        if self.cv_folds < 2 and len(grid) > 1:
            raise InvalidParameterError("cv_folds must be >= 2")
        if self.objective not in OBJECTIVES:
            raise InvalidParameterError(f"objective must be one of {OBJECTIVES}")

    def to_dict(self):
        d = asdict(self)
        d["target"] = str(self.target)
        d["eta_grid"] = list(self.eta_grid)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["network"] = NetworkConfig(**d.get("network", {}))
        d["target"] = Target.parse(d["target"])
        return cls(**d)


@dataclass
class Nuisance:
    """Fitted censoring (``None`` means ``G = 1``) and failure-time curve models."""

    g_model: object
    s_model: object


def fit_nuisance(data_r, spec, seed_key=()):
    forest = RandomSurvivalForest(**spec.forest,
                                  random_state=derive_seed(spec.seed, "forest", *seed_key))
    s_model = forest.fit(data_r.covariates, data_r.y)
    g_model = None
    if spec.variant == "doubly_robust":
        g_model = CensoringTree(**spec.tree).fit(data_r.covariates, data_r.y)
    return Nuisance(g_model, s_model)


def _objective(terms, spec, rows=None):
    sl = slice(None) if rows is None else rows
    if spec.objective == "dr_decomposed":
        return DoublyRobustObjective(terms.combined(2)[sl], terms.combined(1)[sl])
    return SquaredErrorObjective(terms.combined(1)[sl])


def cv_folds(n, k, seed):
    """Random permutation split into ``k`` near-equal folds."""
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass
class CudlModel:
    """A fitted CUDL predictor."""

    standardizer: Standardizer
    weights: NetworkWeights
    spec: CudlSpec
    eta: float
    cv_errors: list
    pseudo_responses: np.ndarray | None = None

    @property
    def head(self):
        return self.spec.target.head

    def predict(self, covariates):
        single = np.ndim(covariates) == 1
        X = np.atleast_2d(np.asarray(covariates, dtype=float))
        out = forward(self.weights, self.standardizer.transform(X), self.head)
        if self.spec.target.kind == "rms" and np.any(out > self.spec.target.horizon):
            warnings.warn(
                f"{int(np.sum(out > self.spec.target.horizon))} restricted-mean predictions "
                f"exceed tau={self.spec.target.horizon}",
                RuntimeWarning, stacklevel=2,
            )
        return float(out[0]) if single else out

    predict_batch = predict

    def to_dict(self):
        return {
            "type": "cudl",
            "spec": self.spec.to_dict(),
            "eta": self.eta,
            "cv_errors": self.cv_errors,
            "standardizer": self.standardizer.to_dict(),
            "weights": self.weights.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            standardizer=Standardizer.from_dict(d["standardizer"]),
            weights=NetworkWeights.from_dict(d["weights"]),
            spec=CudlSpec.from_dict(d["spec"]),
            eta=d["eta"],
            cv_errors=d["cv_errors"],
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _train_config(spec, eta, seed):
    return replace(spec.network, head=spec.target.head, eta=eta, seed=seed)


def fit_cudl(data: Dataset, spec: CudlSpec, nuisance: Nuisance | None = None):
    """Fit a CUDL model.

    Parameters
    ----------
    data : Dataset
        Unrestricted training data.
    spec : CudlSpec
    nuisance : Nuisance, optional
        Pre-fitted curve models for the *restricted* data; fit here otherwise.

    Returns
    -------
    CudlModel
    """
    horizon = spec.target.horizon
    if horizon > data.time.max():
        raise InvalidParameterError(
            f"target horizon {horizon} exceeds the largest observed time {data.time.max()}"
        )
    data_r = spec.target.restrict(data)
    h = spec.target.h
    standardizer = Standardizer().fit(data_r.covariates)
    Z = standardizer.transform(data_r.covariates)
    if nuisance is None:
        nuisance = fit_nuisance(data_r, spec)
    terms = dataset_terms(data_r, nuisance.g_model, nuisance.s_model, h)

    cv_errors = []
    if len(spec.eta_grid) > 1:
        folds = cv_folds(data_r.n, spec.cv_folds, derive_seed(spec.seed, "folds"))
        errors = np.zeros(len(spec.eta_grid))
        for fi, held in enumerate(folds):
            train_rows = np.setdiff1d(np.arange(data_r.n), held)
            fold_terms, held_d = terms, terms.combined(1)[held]
            if spec.refit_nuisance_per_fold:
                sub = data_r.subset(train_rows)
                nz = fit_nuisance(sub, spec, seed_key=(fi,))
                fold_terms = dataset_terms(data_r, nz.g_model, nz.s_model, h)
                held_d = fold_terms.combined(1)[held]
            obj = _objective(fold_terms, spec, train_rows)
            for mi, eta in enumerate(spec.eta_grid):
                cfg = _train_config(spec, eta, derive_seed(spec.seed, "cv", fi, mi))
                w = train(Z[train_rows], obj, cfg)
                pred = forward(w, Z[held], cfg.head)
                errors[mi] += float(np.sum((held_d - pred) ** 2))
        cv_errors = errors.tolist()
        eta = spec.eta_grid[int(np.argmin(errors))]
    else:
        eta = spec.eta_grid[0]

    cfg = _train_config(spec, eta, derive_seed(spec.seed, "final"))
    weights = train(Z, _objective(terms, spec), cfg)
    return CudlModel(standardizer, weights, spec, eta, cv_errors, terms.combined(1))


def predict(model, covariates):
    return model.predict(covariates)


class CUDLRegressor(BaseEstimator):
    """Censoring unbiased deep learning estimator with a scikit-learn interface.

    ``fit(X, y)`` takes a survival target ``y`` of shape ``(n, 2)`` with
    columns (time, event); ``predict(X)`` returns ``P(T >= t | X)`` for
    ``target="brier"`` or ``E[min(T, tau) | X]`` for ``target="rms"``.

    Parameters
    ----------
    variant : {"doubly_robust", "buckley_james"}
    target : {"brier", "rms"}
    horizon : float
        ``t`` or ``tau``.
    eta_grid : sequence of float
    cv_folds : int
    hidden_units, epochs, batch_size, dropout_rate, learning_rate :
        Network settings (see :class:`~cudl.network.NetworkConfig`).
    n_estimators, min_samples_leaf : forest settings for the survival curve.
    censoring_min_leaf, trunc_frac : censoring tree settings.
    refit_nuisance_per_fold : bool
    random_state : int
    """

    def __init__(self, variant="doubly_robust", target="brier", horizon=1.0,
                 eta_grid=(0.0, 0.001, 0.01, 0.1), cv_folds=5, hidden_units=15, epochs=100,
                 batch_size=32, dropout_rate=0.2, learning_rate=0.001, n_estimators=100,
                 min_samples_leaf=15, censoring_min_leaf=30, trunc_frac=0.10,
                 refit_nuisance_per_fold=False, random_state=0):
        self.variant = variant
        self.target = target
        self.horizon = horizon
        self.eta_grid = eta_grid
        self.cv_folds = cv_folds
        self.hidden_units = hidden_units
        self.epochs = epochs
        self.batch_size = batch_size
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.n_estimators = n_estimators
        self.min_samples_leaf = min_samples_leaf
        self.censoring_min_leaf = censoring_min_leaf
        self.trunc_frac = trunc_frac
        self.refit_nuisance_per_fold = refit_nuisance_per_fold
        self.random_state = random_state

    def _spec(self):
        return CudlSpec(
            target=Target(self.target, self.horizon),
            variant=self.variant,
            eta_grid=tuple(self.eta_grid),
            cv_folds=self.cv_folds,
            network=NetworkConfig(hidden_units=self.hidden_units, epochs=self.epochs,
                                  batch_size=self.batch_size, dropout_rate=self.dropout_rate,
                                  learning_rate=self.learning_rate),
            forest={**DEFAULT_FOREST, "n_estimators": self.n_estimators,
                    "min_samples_leaf": self.min_samples_leaf},
            tree={**DEFAULT_TREE, "min_leaf": self.censoring_min_leaf,
                  "trunc_frac": self.trunc_frac},
            refit_nuisance_per_fold=self.refit_nuisance_per_fold,
            seed=0 if self.random_state is None else int(self.random_state),
        )

    def fit(self, X, y, nuisance=None):
        data = Dataset.from_xy(check_array(X, dtype=float), y)
        self.model_ = fit_cudl(data, self._spec(), nuisance=nuisance)
        self.eta_ = self.model_.eta
        self.n_features_in_ = data.p
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(check_array(X, dtype=float))
