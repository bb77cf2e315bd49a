"""Survival data containers, covariate standardization and horizon restriction."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DataValidationError, InsufficientDataError, InvalidParameterError


@dataclass(frozen=True)
class Observation:
    """One subject: observed time ``min(T, C)``, event indicator and covariates."""

    time: float
    event: int
    covariates: np.ndarray

    def __post_init__(self):
        if not (self.time > 0 and np.isfinite(self.time)):
            raise DataValidationError(f"time must be positive and finite, got {self.time!r}")
        if self.event not in (0, 1):
            raise DataValidationError(f"event must be 0 or 1, got {self.event!r}")
        cov = np.asarray(self.covariates, dtype=float).ravel()
        if not np.all(np.isfinite(cov)):
            raise DataValidationError("covariates contain missing or non-finite entries")
        cov.setflags(write=False)
        object.__setattr__(self, "covariates", cov)


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Right-censored dataset held column-wise.

    Parameters
    ----------
    time : array-like of shape (n,)
        Observed times, strictly positive.
    event : array-like of shape (n,)
        1 if the observed time is a failure, 0 if censored.
    covariates : array-like of shape (n, p)
    """

    time: np.ndarray
    event: np.ndarray
    covariates: np.ndarray = field(repr=False)

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float).ravel()
        event = np.asarray(self.event)
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov.reshape(len(time), -1) if len(time) else cov.reshape(0, 0)
        n = len(time)
        if n < 1:
            raise InsufficientDataError("dataset must contain at least one row")
        if event.shape != (n,) or cov.shape[0] != n:
            raise DataValidationError(
                f"length mismatch: time {n}, event {event.shape}, covariates {cov.shape}"
            )
        bad = np.flatnonzero(~(np.isfinite(time) & (time > 0)))
        if bad.size:
            raise DataValidationError(
                f"row {bad[0]}: time must be positive and finite, got {time[bad[0]]!r}"
            )
        bad = np.flatnonzero((event != 0) & (event != 1))
        if bad.size:
            raise DataValidationError(f"row {bad[0]}: event must be 0 or 1, got {event[bad[0]]!r}")
        bad = np.flatnonzero(~np.all(np.isfinite(cov), axis=1))
        if bad.size:
            raise DataValidationError(f"row {bad[0]}: covariates contain missing values")
        object.__setattr__(self, "time", _readonly(time))
        object.__setattr__(self, "event", _readonly(event.astype(np.int64)))
        object.__setattr__(self, "covariates", _readonly(cov))

    @classmethod
    def from_observations(cls, observations):
        observations = list(observations)
        if not observations:
            raise InsufficientDataError("dataset must contain at least one row")
        p = {len(o.covariates) for o in observations}
        if len(p) != 1:
            raise DataValidationError(f"covariate lengths differ across rows: {sorted(p)}")
        return cls(
            time=[o.time for o in observations],
            event=[o.event for o in observations],
            covariates=np.vstack([o.covariates for o in observations]),
        )

    @classmethod
    def from_xy(cls, X, y):
        time, event = check_survival_y(y)
        return cls(time, event, np.asarray(X, dtype=float))

    def __len__(self):
        return len(self.time)

    def __getitem__(self, i):
        return Observation(float(self.time[i]), int(self.event[i]), self.covariates[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def n(self):
        return len(self.time)

    @property
    def p(self):
        return self.covariates.shape[1]

    @property
    def y(self):
        """``(n, 2)`` array with columns (time, event)."""
        return np.column_stack([self.time, self.event.astype(float)])

    def subset(self, index):
        index = np.asarray(index)
        return Dataset(self.time[index], self.event[index], self.covariates[index])

    def censoring_rate(self):
        return 1.0 - float(np.mean(self.event))


def make_y(time, event):
    """Stack times and event indicators into the ``(n, 2)`` target layout."""
    return np.column_stack([np.asarray(time, dtype=float), np.asarray(event, dtype=float)])


def check_survival_y(y):
    """Split a survival target into ``(time, event)`` arrays.

    Accepts an ``(n, 2)`` array with columns (time, event), a structured
    array with ``time`` and ``event`` fields, or a :class:`Dataset`.
    """
    if isinstance(y, Dataset):
        return np.asarray(y.time, dtype=float), np.asarray(y.event, dtype=np.int64)
    y_arr = np.asarray(y)
    if y_arr.dtype.names is not None:
        time = np.asarray(y_arr["time"], dtype=float)
        event = np.asarray(y_arr["event"]).astype(float)
    else:
        y_arr = np.asarray(y_arr, dtype=float)
        if y_arr.ndim != 2 or y_arr.shape[1] != 2:
            raise DataValidationError(
                f"survival target must have shape (n, 2) = (time, event), got {y_arr.shape}"
            )
        time, event = y_arr[:, 0], y_arr[:, 1]
    if not np.all(np.isin(event, (0.0, 1.0))):
        raise DataValidationError("event indicators must be 0 or 1")
    if not np.all(np.isfinite(time) & (time > 0)):
        raise DataValidationError("observed times must be positive and finite")
    return time, event.astype(np.int64)


def _restrict(data, horizon):
    if not horizon > 0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon!r}")
    time = np.minimum(data.time, horizon)
    # min(T, tau) <= C  <=>  observed failure or follow-up reaching the horizon
    event = ((data.event == 1) | (data.time >= horizon)).astype(np.int64)
    return Dataset(time, event, data.covariates)


def restrict_rms(data, tau):
    """Dataset for restricted mean survival at horizon ``tau``.

    Times become ``min(T~, tau)``; rows followed up to at least ``tau`` are
    fully observed for the capped outcome and get ``event = 1``.
    """
    return _restrict(data, tau)


def restrict_brier(data, t):
    """Dataset for the survival probability ``P(T >= t | W)``; same map as :func:`restrict_rms`."""
    return _restrict(data, t)


class Standardizer(TransformerMixin, BaseEstimator):
    """Column standardization with the sample (n - 1) standard deviation.

    Constant columns receive scale 1, so they map to 0.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[0] < 2:
            raise InsufficientDataError("standardizer needs at least 2 rows")
        self.means_ = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
        self.scales_ = np.where(sd > 0, sd, 1.0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "means_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise DataValidationError(
                f"expected {self.n_features_in_} covariates, got {X.shape[1]}"
            )
        return (X - self.means_) / self.scales_

    def inverse_transform(self, Z):
        check_is_fitted(self, "means_")
        return np.asarray(Z, dtype=float) * self.scales_ + self.means_

    def to_dict(self):
        return {"means": self.means_.tolist(), "scales": self.scales_.tolist()}

    @classmethod
    def from_dict(cls, d):
        s = cls()
        s.means_ = np.asarray(d["means"], dtype=float)
        s.scales_ = np.asarray(d["scales"], dtype=float)
        s.n_features_in_ = len(s.means_)
        return s

    @classmethod
    def identity(cls, p):
        return cls.from_dict({"means": [0.0] * p, "scales": [1.0] * p})


def fit_standardizer(data):
    return Standardizer().fit(data.covariates if isinstance(data, Dataset) else data)


def apply_standardizer(standardizer, covariates):
    covariates = np.asarray(covariates, dtype=float)
    if covariates.ndim == 1:
        return standardizer.transform(covariates[None, :])[0]
    return standardizer.transform(covariates)


# --------------------------------------------------------------------- CSV io

def _parse_float(cell, row, column):
    try:
        return float(cell)
    except ValueError:
        raise DataValidationError(
            f"row {row}: non-numeric value {cell!r} in column {column!r}"
        ) from None


def read_table(path_or_buffer):
    """Read a numeric CSV into ``(header, matrix)``; row numbers in errors are 1-based data rows."""
    if isinstance(path_or_buffer, (str, Path)):
        with open(path_or_buffer, newline="", encoding="utf-8") as fh:
            return read_table(fh)
    reader = csv.reader(path_or_buffer)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataValidationError("empty CSV: missing header row") from None
    rows = []
    for i, record in enumerate(reader, start=1):
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) != len(header):
            raise DataValidationError(
                f"row {i}: expected {len(header)} cells, got {len(record)}"
            )
        rows.append([_parse_float(c.strip(), i, h) for c, h in zip(record, header)])
    return header, np.asarray(rows, dtype=float).reshape(len(rows), len(header))


def read_csv(path_or_buffer, extra_columns=()):
    """Load a dataset CSV with columns ``time``, ``event`` then covariates.

    Columns named in ``extra_columns`` (e.g. truth columns written by the
    simulator) are dropped from the covariates and returned separately.
    """
    header, values = read_table(path_or_buffer)
    if header[:2] != ["time", "event"]:
        raise DataValidationError(
            f"CSV must start with columns 'time', 'event'; got {header[:2]}"
        )
    if values.shape[0] == 0:
        raise InsufficientDataError("CSV contains no data rows")
    extra = {c: values[:, header.index(c)] for c in extra_columns if c in header}
    cov_idx = [j for j, h in enumerate(header[2:], start=2) if h not in extra]
    for j, col in ((0, "time"), (1, "event")):
        bad = np.flatnonzero(
            ~(values[:, j] > 0) if col == "time" else ~np.isin(values[:, j], (0.0, 1.0))
        )
        if bad.size:
            raise DataValidationError(
                f"row {bad[0] + 1}: invalid {col} value {values[bad[0], j]!r}"
            )
    data = Dataset(values[:, 0], values[:, 1].astype(np.int64), values[:, cov_idx])
    names = [header[j] for j in cov_idx]
    if extra_columns:
        return data, names, extra
    return data, names


def format_float(x):
    return repr(float(x))


def write_csv(path_or_buffer, header, columns):
    """Write equal-length columns under ``header`` with round-trip float formatting."""
    if isinstance(path_or_buffer, (str, Path)):
        with open(path_or_buffer, "w", newline="", encoding="utf-8") as fh:
            return write_csv(fh, header, columns)
    writer = csv.writer(path_or_buffer, lineterminator="\n")
    writer.writerow(header)
    cols = [np.asarray(c) for c in columns]
    for row in zip(*cols):
        writer.writerow([str(int(v)) if np.issubdtype(type(v), np.integer) else format_float(v)
                         for v in row])


def write_dataset(path_or_buffer, data, names=None, extra=None):
    names = names or [f"w{j + 1}" for j in range(data.p)]
    extra = extra or {}
    header = ["time", "event", *names, *extra]
    columns = [data.time, data.event, *data.covariates.T, *extra.values()]
    write_csv(path_or_buffer, header, columns)


def dataset_to_csv_string(data, names=None, extra=None):
    buf = io.StringIO()
    write_dataset(buf, data, names, extra)
    return buf.getvalue()
