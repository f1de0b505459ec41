"""Benchmark expectation functionals."""

from .base import ExpectationProblem, Negated, QuadraticProblem, as_points
from .gaussian import GaussianTailProblem, gaussian_sample_objective
from .logistic import (
    FitStats,
    LogisticIMProblem,
    MleResult,
    constrained_mle,
    contour_estimate,
    fit_logistic_batch,
    full_factorial_design,
    likelihood_ratio_T,
    logistic_mle,
    logistic_simulate,
    loglik,
    sim1_design,
    sim2_design,
    upper_probability_objective,
)

__all__ = [
    "ExpectationProblem",
    "FitStats",
    "GaussianTailProblem",
    "LogisticIMProblem",
    "MleResult",
    "Negated",
    "QuadraticProblem",
    "as_points",
    "constrained_mle",
    "contour_estimate",
    "fit_logistic_batch",
    "full_factorial_design",
    "gaussian_sample_objective",
    "likelihood_ratio_T",
    "logistic_mle",
    "logistic_simulate",
    "loglik",
    "sim1_design",
    "sim2_design",
    "upper_probability_objective",
]
