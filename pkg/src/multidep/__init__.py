"""Distance multivariance independence testing."""

from ._backend import BACKEND, available_backends
from .engine import ConfigError, EstimatorConfig, TestResult, TestSpec, run_test
from .psi_kernels import DataError, PsiFunction, distance_matrix, matrix_stats
from .statistics import (
    Dataset,
    StatisticKind,
    compute_statistic,
    sample_m_multivariance,
    sample_multivariance,
    sample_total_multivariance,
)

__all__ = [
    "BACKEND",
    "ConfigError",
    "DataError",
    "Dataset",
    "EstimatorConfig",
    "PsiFunction",
    "StatisticKind",
    "TestResult",
    "TestSpec",
    "available_backends",
    "compute_statistic",
    "distance_matrix",
    "matrix_stats",
    "run_test",
    "sample_m_multivariance",
    "sample_multivariance",
    "sample_total_multivariance",
]
