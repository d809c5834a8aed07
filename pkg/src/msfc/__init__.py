"""Multi-step-ahead forecasting with EMD ensembles of feed-forward networks."""

__version__ = "0.1.0"

from .emd import BoundaryMode, Decomposition, SiftConfig, decompose, reconstruct
from .exceptions import CapabilityError, ConfigError, DataError, MsfcError, NumericalError
from .ingest import ingest, load_wti
from .metrics import EvaluationFrame, ds, mase, smape
from .nnet import FnnConfig, FnnModel, FnnRegressor, TrainConfig
from .pipeline import ExperimentConfig, ExperimentReport, ModelSpec, Technique, run_experiment
from .selection import Criterion, SelectionCriterion, select_lags
from .series import MinMaxScaler, Series, SplitSpec, build_lag_matrix, fit_scaler, split
from .spa import SpaConfig, SpaResult, spa_matrix, spa_test
from .strategies import LinearRegressor, Strategy

__all__ = [
    "BoundaryMode",
    "CapabilityError",
    "ConfigError",
    "Criterion",
    "DataError",
    "Decomposition",
    "EvaluationFrame",
    "ExperimentConfig",
    "ExperimentReport",
    "FnnConfig",
    "FnnModel",
    "FnnRegressor",
    "LinearRegressor",
    "MinMaxScaler",
    "ModelSpec",
    "MsfcError",
    "NumericalError",
    "SelectionCriterion",
    "Series",
    "SiftConfig",
    "SpaConfig",
    "SpaResult",
    "SplitSpec",
    "Strategy",
    "Technique",
    "TrainConfig",
    "build_lag_matrix",
    "decompose",
    "ds",
    "fit_scaler",
    "ingest",
    "load_wti",
    "mase",
    "reconstruct",
    "run_experiment",
    "select_lags",
    "smape",
    "spa_matrix",
    "spa_test",
    "split",
]
