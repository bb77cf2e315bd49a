"""Nuisance estimators for the censoring and failure-time survival curves.

Every fitted model here exposes ``predict_curves(X)`` returning one
:class:`~cudl.curves.StepSurvivalCurve` per row, which is all the
transformation code needs.
"""

from __future__ import annotations

import math

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._logrank import midpoints, scan_splits
from .curves import StepSurvivalCurve, restricted_mean_from_curve
from .data import check_survival_y
from .exceptions import InsufficientDataError, InvalidParameterError


def _event_table(time, event, weights=None):
    """Distinct event times with (weighted) event and at-risk counts."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    w = np.ones(time.size) if weights is None else np.asarray(weights, dtype=float)
    ev = event == 1
    u = np.unique(time[ev])
    d = np.bincount(np.searchsorted(u, time[ev]), weights=w[ev], minlength=u.size)
    order = np.argsort(time, kind="stable")
    cum_w = np.concatenate(([0.0], np.cumsum(w[order])))
    # at risk at u_j: time >= u_j
    y = cum_w[-1] - cum_w[np.searchsorted(time[order], u, side="left")]
    return u, d, y


def product_limit(time, event, weights=None):
    """Kaplan-Meier curve ``prod_{u_j <= t} (1 - d_j / n_j)``."""
    u, d, y = _event_table(time, event, weights)
    return StepSurvivalCurve(u, np.cumprod((y - d) / y))


def nelson_aalen(time, event, weights=None):
    """Nelson-Aalen increments ``(u_j, d_j / n_j)``."""
    u, d, y = _event_table(time, event, weights)
    return u, d / y


class KaplanMeier(BaseEstimator):
    """Marginal product-limit estimator.

    Also usable as a covariate-free conditional curve model: every row
    gets the same curve from :meth:`predict_curves`.
    """

    def fit(self, time, event):
        time = np.asarray(time, dtype=float).ravel()
        event = np.asarray(event).ravel()
        if time.size == 0:
            raise InsufficientDataError("Kaplan-Meier needs at least one observation")
        if time.shape != event.shape:
            raise InvalidParameterError("time and event lengths differ")
        self.curve_ = product_limit(time, event)
        return self

    def predict_curves(self, X):
        check_is_fitted(self, "curve_")
        return [self.curve_] * len(X)

    def predict_curve(self, x=None):
        check_is_fitted(self, "curve_")
        return self.curve_


def km_fit(times, events):
    return KaplanMeier().fit(times, events)


class UnitCurveModel:
    """``G = 1`` everywhere: turns the doubly robust transform into Buckley-James."""

    is_unit = True

    def predict_curves(self, X):
        return [StepSurvivalCurve.unit()] * len(X)

    def predict_curve(self, x=None):
        return StepSurvivalCurve.unit()


class KnownCurveModel:
    """A known survival function discretized onto a fixed time grid.

    Parameters
    ----------
    survival : callable
        ``survival(X, grid)`` returning an ``(n, len(grid))`` array of
        survival probabilities.
    grid : array-like
        Strictly increasing positive jump times.
    """

    def __init__(self, survival, grid):
        self.survival = survival
        self.grid = np.asarray(grid, dtype=float)

    def predict_curves(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        values = np.asarray(self.survival(X, self.grid), dtype=float)
        values = np.broadcast_to(values, (X.shape[0], self.grid.size))
        return [StepSurvivalCurve(self.grid, v) for v in values]

    def predict_curve(self, x):
        return self.predict_curves(np.atleast_2d(x))[0]


# ------------------------------------------------------------------ trees

class _Tree:
    """Flat binary tree: ``feature[i] < 0`` marks a leaf whose payload is ``leaf[i]``."""

    def __init__(self, feature, threshold, left, right, leaf):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.leaf = np.asarray(leaf, dtype=np.int64)

    @property
    def n_leaves(self):
        return int((self.feature < 0).sum())

    def apply(self, X):
        """Leaf index for every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return self.leaf[node]

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "leaf")}

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["leaf"])


def grow_tree(X, time, event, weights=None, *, min_leaf, max_depth=None, min_stat=0.0,
              mtry=None, nsplit=0, rng=None):
    """Grow a log-rank survival tree.

    Splits maximize the two-sample log-rank statistic over candidate
    midpoints; ties go to the lowest covariate index, then the lowest
    threshold.  ``mtry`` covariates are sampled per node when given, and
    ``nsplit > 0`` samples that many candidate thresholds per covariate.

    Returns
    -------
    tree : _Tree
    leaf_rows : list of index arrays into the (weighted) input rows
    """
    n, p = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    feature, threshold, left, right, leaf = [], [], [], [], []
    leaf_rows = []

    def new_node():
        for lst, v in ((feature, -1), (threshold, np.nan), (left, -1), (right, -1), (leaf, -1)):
            lst.append(v)
        return len(feature) - 1

    stack = [(new_node(), np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        best = (-np.inf, -1, np.nan)
        if (max_depth is None or depth < max_depth) and w[rows].sum() >= 2 * min_leaf:
            if mtry is None or mtry >= p:
                features = range(p)
            else:
                features = np.sort(rng.choice(p, size=mtry, replace=False))
            t_node, e_node, w_node = time[rows], event[rows], w[rows]
            for f in features:
                x = X[rows, f]
                cands = midpoints(x)
                if nsplit and cands.size > nsplit:
                    cands = np.sort(rng.choice(cands, size=nsplit, replace=False))
                if cands.size == 0:
                    continue
                stats = scan_splits(x, t_node, e_node, cands, min_leaf, w_node)
                k = int(np.argmax(stats))
                if stats[k] > best[0]:
                    best = (stats[k], int(f), cands[k])
        stat, f, c = best
        if np.isfinite(stat) and stat > 0 and stat >= min_stat:
            go_left = X[rows, f] <= c
            feature[node], threshold[node] = f, c
            l_node, r_node = new_node(), new_node()
            left[node], right[node] = l_node, r_node
            # right pushed first so the left subtree is numbered first
            stack.append((r_node, rows[~go_left], depth + 1))
            stack.append((l_node, rows[go_left], depth + 1))
        else:
            leaf[node] = len(leaf_rows)
            leaf_rows.append(rows)
    return _Tree(feature, threshold, left, right, leaf), leaf_rows


def method2_truncate(time, event, frac):
    """Relabel the ``ceil(frac * n)`` largest observed times as failures."""
    event = np.array(event, copy=True)
    k = min(len(time), math.ceil(frac * len(time))) if len(time) else 0
    if k:
        order = np.argsort(time, kind="stable")
        event[order[-k:]] = 1
    return event


class CensoringTree(BaseEstimator):
    """Survival tree for the censoring distribution ``G(u | w) = P(C > u | w)``.

    The tree is grown with censoring as the event (``1 - event``) using
    log-rank splits.  Inside each terminal node the ``ceil(trunc_frac * n)``
    rows with the largest observed times are relabelled as failures before
    the leaf's censoring Kaplan-Meier curve is fit, which keeps the
    estimate bounded away from zero at every training time.

    Parameters
    ----------
    min_leaf : int, default=30
        Minimum number of rows in a terminal node.
    trunc_frac : float, default=0.10
        Fraction of each leaf relabelled as failures.
    max_depth : int, default=10
    min_logrank : float, default=0.1
        Splits with a smaller log-rank chi-square are not made.
    """

    def __init__(self, min_leaf=30, trunc_frac=0.10, max_depth=10, min_logrank=0.1):
        self.min_leaf = min_leaf
        self.trunc_frac = trunc_frac
        self.max_depth = max_depth
        self.min_logrank = min_logrank

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        time, event = check_survival_y(y)
        if not 0 <= self.trunc_frac < 1:
            raise InvalidParameterError("trunc_frac must lie in [0, 1)")
        self.n_features_in_ = X.shape[1]
        self.tree_, leaf_rows = grow_tree(
            X, time, 1 - event, min_leaf=self.min_leaf, max_depth=self.max_depth,
            min_stat=self.min_logrank,
        )
        self.leaf_curves_ = []
        self.leaf_sizes_ = []
        self.leaf_modified_ = []
        for rows in leaf_rows:
            ev = method2_truncate(time[rows], event[rows], self.trunc_frac)
            self.leaf_modified_.append(int(((ev == 1) & (event[rows] == 0)).sum()))
            self.leaf_sizes_.append(len(rows))
            self.leaf_curves_.append(product_limit(time[rows], 1 - ev))
        return self

    def apply(self, X):
        check_is_fitted(self, "tree_")
        return self.tree_.apply(check_array(X, dtype=float))

    def predict_curves(self, X):
        return [self.leaf_curves_[k] for k in self.apply(X)]

    def predict_curve(self, x):
        return self.predict_curves(np.atleast_2d(x))[0]

    def to_dict(self):
        check_is_fitted(self, "tree_")
        return {
            "type": "censoring_tree",
            "params": self.get_params(),
            "n_features_in": self.n_features_in_,
            "tree": self.tree_.to_dict(),
            "leaf_curves": [c.to_dict() for c in self.leaf_curves_],
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(**d["params"])
        m.n_features_in_ = d["n_features_in"]
        m.tree_ = _Tree.from_dict(d["tree"])
        m.leaf_curves_ = [StepSurvivalCurve.from_dict(c) for c in d["leaf_curves"]]
        return m


def censoring_tree_fit(data, min_leaf=30, trunc_frac=0.10, **kwargs):
    return CensoringTree(min_leaf=min_leaf, trunc_frac=trunc_frac, **kwargs).fit(
        data.covariates, data.y
    )


# ----------------------------------------------------------------- forest

def _tree_rng(seed, b):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))


def _fit_one_tree(X, time, event, b, seed, mtry, min_leaf, nsplit, max_depth, bootstrap):
    rng = _tree_rng(seed, b)
    n = X.shape[0]
    if bootstrap:
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        rows = np.flatnonzero(counts)
        w = counts[rows].astype(float)
    else:
        rows = np.arange(n)
        w = np.ones(n)
    Xb, tb, eb = X[rows], time[rows], event[rows]
    tree, leaf_rows = grow_tree(Xb, tb, eb, w, min_leaf=min_leaf, max_depth=max_depth,
                                mtry=mtry, nsplit=nsplit, rng=rng)
    times, incr = [], []
    for r in leaf_rows:
        u, h = nelson_aalen(tb[r], eb[r], w[r])
        times.append(u)
        incr.append(h)
    return tree, times, incr


class RandomSurvivalForest(BaseEstimator):
    """Random survival forest with log-rank splitting.

    Each tree is grown on a bootstrap sample, sampling ``max_features``
    covariates per node and ``nsplit`` random candidate thresholds per
    covariate.  Leaves hold Nelson-Aalen cumulative hazards; the forest
    prediction averages them and returns ``S = exp(-H)``.

    Parameters
    ----------
    n_estimators : int, default=100
    max_features : int or "sqrt", default="sqrt"
        ``"sqrt"`` means ``ceil(sqrt(p))``.
    min_samples_leaf : int, default=15
    nsplit : int, default=10
        Random candidate thresholds per covariate; 0 searches all midpoints.
    bootstrap : bool, default=True
    max_depth : int or None, default=None
    random_state : int or None
        Tree ``b`` draws from a stream derived from ``(random_state, b)``,
        so serial and parallel fits agree.
    n_jobs : int or None
    """

    def __init__(self, n_estimators=100, max_features="sqrt", min_samples_leaf=15, nsplit=10,
                 bootstrap=True, max_depth=None, random_state=None, n_jobs=None):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.nsplit = nsplit
        self.bootstrap = bootstrap
        self.max_depth = max_depth
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _mtry(self, p):
        if self.max_features == "sqrt":
            return math.ceil(math.sqrt(p))
        if self.max_features is None:
            return p
        m = int(self.max_features)
        if not 1 <= m <= p:
            raise InvalidParameterError(f"max_features must lie in [1, {p}], got {m}")
        return m

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        time, event = check_survival_y(y)
        if self.n_estimators < 1:
            raise InvalidParameterError("n_estimators must be >= 1")
        self.n_features_in_ = X.shape[1]
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1)[0])
        self.seed_ = int(seed)
        args = (self._mtry(X.shape[1]), self.min_samples_leaf, self.nsplit, self.max_depth,
                self.bootstrap)
        if self.n_jobs in (None, 1):
            fitted = [_fit_one_tree(X, time, event, b, self.seed_, *args)
                      for b in range(self.n_estimators)]
        else:
            fitted = Parallel(n_jobs=self.n_jobs)(
                delayed(_fit_one_tree)(X, time, event, b, self.seed_, *args)
                for b in range(self.n_estimators)
            )
        self._set_trees(fitted)
        return self

    def _set_trees(self, fitted):
        self.trees_ = [t for t, _, _ in fitted]
        self.leaf_times_ = [lt for _, lt, _ in fitted]
        self.leaf_hazards_ = [lh for _, _, lh in fitted]

    def apply(self, X):
        """``(n, n_estimators)`` matrix of leaf indices."""
        check_is_fitted(self, "trees_")
        X = check_array(X, dtype=float)
        return np.column_stack([t.apply(X) for t in self.trees_])

    def _curve_for(self, leaves):
        times = np.concatenate([self.leaf_times_[b][k] for b, k in enumerate(leaves)])
        incr = np.concatenate([self.leaf_hazards_[b][k] for b, k in enumerate(leaves)])
        if times.size == 0:
            return StepSurvivalCurve.unit()
        u, inv = np.unique(times, return_inverse=True)
        h = np.bincount(inv, weights=incr, minlength=u.size)
        return StepSurvivalCurve(u, np.exp(-np.cumsum(h) / len(self.trees_)))

    def predict_curves(self, X):
        leaves = self.apply(X)
        # rows sharing every leaf share the curve
        uniq, inverse = np.unique(leaves, axis=0, return_inverse=True)
        curves = [self._curve_for(row) for row in uniq]
        return [curves[i] for i in np.asarray(inverse).ravel()]

    def predict_curve(self, x):
        return self.predict_curves(np.atleast_2d(x))[0]

    def predict_survival(self, X, t):
        """``P(T >= t | w)``, the left limit of the forest curve at ``t``."""
        return np.array([c.eval_left(t) for c in self.predict_curves(X)])

    def predict_rms(self, X, tau):
        return np.array([restricted_mean_from_curve(c, tau) for c in self.predict_curves(X)])

    def to_dict(self):
        check_is_fitted(self, "trees_")
        return {
            "type": "random_survival_forest",
            "params": self.get_params(),
            "n_features_in": self.n_features_in_,
            "seed": self.seed_,
            "trees": [t.to_dict() for t in self.trees_],
            "leaf_times": [[a.tolist() for a in lt] for lt in self.leaf_times_],
            "leaf_hazards": [[a.tolist() for a in lh] for lh in self.leaf_hazards_],
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(**d["params"])
        m.n_features_in_ = d["n_features_in"]
        m.seed_ = d["seed"]
        m._set_trees([
            (_Tree.from_dict(t), [np.asarray(a, dtype=float) for a in lt],
             [np.asarray(a, dtype=float) for a in lh])
            for t, lt, lh in zip(d["trees"], d["leaf_times"], d["leaf_hazards"])
        ])
        return m


def forest_fit(data, n_trees=100, mtry="sqrt", min_leaf=15, seed=None, **kwargs):
    return RandomSurvivalForest(n_estimators=n_trees, max_features=mtry,
                                min_samples_leaf=min_leaf, random_state=seed,
                                **kwargs).fit(data.covariates, data.y)


def forest_predict(forest, w):
    return forest.predict_curve(w)
