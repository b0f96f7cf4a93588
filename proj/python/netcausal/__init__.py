"""Causal discovery and back-door prediction for tabular network measurements."""

from ._core import (
    ComputationError,
    CiTestResult,
    CopulaModel,
    Cpdag,
    Dag,
    Dataset,
    InvalidInput,
    __version__,
    cpdag_of,
    dag_from_json,
    fisher_z_test,
    fit_copula,
    hsic_statistic,
    hsic_test,
    kernel_ci_test,
    load_csv,
    pc,
    predict,
    simulate,
    structural_hamming_distance,
    summarize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
