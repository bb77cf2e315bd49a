"""Censoring unbiased deep learning for right-censored survival outcomes."""

__version__ = "0.1.0"

from .baselines import CoxPHSurvival, cox_fit
from .curves import StepSurvivalCurve, m_k, restricted_mean_from_curve
from .data import Dataset, Observation, Standardizer, read_csv, restrict_brier, restrict_rms
from .estimators import (
    CensoringTree,
    KaplanMeier,
    KnownCurveModel,
    RandomSurvivalForest,
    UnitCurveModel,
    km_fit,
)
from .evaluation import BenchmarkGrid, benchmark_grid, mse_vs_truth, stratified_cv_brier
from .exceptions import (
    CudlError,
    DataValidationError,
    DegenerateFoldError,
    DivergenceError,
    InvalidParameterError,
    NumericalError,
    PositivityError,
)
from .losses import bj_loss, censored_brier, dr_loss, ipcw_loss, transformed_l2
from .network import NetworkConfig, NetworkWeights
from .pipeline import CUDLRegressor, CudlModel, CudlSpec, Target, fit_cudl
from .simulation import SettingConfig, simulate
from .transforms import RestrictedTime, SurvivalIndicator, compute_terms, transform_dataset

__all__ = [
    "BenchmarkGrid", "CUDLRegressor", "CensoringTree", "CoxPHSurvival", "CudlError", "CudlModel",
    "CudlSpec", "DataValidationError", "Dataset", "DegenerateFoldError", "DivergenceError",
    "InvalidParameterError", "KaplanMeier", "KnownCurveModel", "NetworkConfig", "NetworkWeights",
    "NumericalError", "Observation", "PositivityError", "RandomSurvivalForest", "RestrictedTime",
    "SettingConfig", "Standardizer", "StepSurvivalCurve", "SurvivalIndicator", "Target",
    "UnitCurveModel", "benchmark_grid", "bj_loss", "censored_brier", "compute_terms", "cox_fit",
    "dr_loss", "fit_cudl", "ipcw_loss", "km_fit", "m_k", "mse_vs_truth", "read_csv",
    "restrict_brier", "restrict_rms", "restricted_mean_from_curve", "simulate",
    "stratified_cv_brier", "transform_dataset", "transformed_l2",
]
