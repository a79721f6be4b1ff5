"""Forward-bootstrap prediction for nonparametric autoregressions."""
from .backend import BACKEND
from .engine import (
    PredictionResult,
    fit_forecaster,
    oracle_predict,
    ppi_predict,
    qpi_predict,
)
from .kernel_regress import EstimatedModel, KernelSpec, select_bandwidth

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EstimatedModel",
    "KernelSpec",
    "PredictionResult",
    "fit_forecaster",
    "oracle_predict",
    "ppi_predict",
    "qpi_predict",
    "select_bandwidth",
]
