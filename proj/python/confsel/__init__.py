"""Confounder selection and matching estimators."""

from ._core import (
    DEFAULT_SEED,
    BackendError,
    SimulationError,
    ValidationError,
    estimate,
    fit_logistic,
    latent_binary_correlation,
    match_nearest,
    run_study,
    select,
    simulate,
)

__all__ = [
    "DEFAULT_SEED",
    "BackendError",
    "SimulationError",
    "ValidationError",
    "estimate",
    "fit_logistic",
    "latent_binary_correlation",
    "match_nearest",
    "run_study",
    "select",
    "simulate",
]
