"""Stochastic gradient estimates for the update engine.

Two families are provided: the unbiased score-function estimator, which
needs the problem to sample gradients directly, and the central
finite-difference (Kiefer-Wolfowitz) estimator, which only needs objective
draws.  Both average ``M`` independent replicates per call.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import UnsupportedCouplingError, UnsupportedEstimatorError


class EstimateKind(enum.Enum):
    SCORE = "score"
    FINITE_DIFFERENCE = "finite_difference"
    BATCHED = "batched"


class Coupling(enum.Enum):
    INDEPENDENT = "independent"
    CRN = "crn"


@dataclass(frozen=True)
class GradientEstimate:
    value: np.ndarray
    mc_draws: int
    kind: EstimateKind

    def __post_init__(self):
        if self.mc_draws < 1:
            raise ValueError("mc_draws must be at least 1")


@dataclass(frozen=True)
class FdConfig:
    """Finite-difference settings; the radius at step t is ``c0 * t**-gamma``."""

    c0: float = 1.0
    gamma: float = 0.5
    batch_M: int = 1
    coupling: Coupling = Coupling.INDEPENDENT

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError(f"c0 must be positive, got {self.c0!r}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma!r}")
        if self.batch_M < 1:
            raise ValueError(f"batch_M must be positive, got {self.batch_M!r}")
        if not isinstance(self.coupling, Coupling):
            object.__setattr__(self, "coupling", Coupling(self.coupling))

    def radius(self, t: int) -> float:
        return self.c0 * t ** (-self.gamma)


def score_gradient(problem, theta, rng: np.random.Generator, batch_M: int = 1) -> GradientEstimate:
    """Mean of ``batch_M`` unbiased gradient draws ``h_theta(Y)``."""
    if not getattr(problem, "has_score", False):
        raise UnsupportedEstimatorError(
            f"{type(problem).__name__} does not provide a score-function sampler"
        )
    if batch_M < 1:
        raise ValueError("batch_M must be positive")
    draws = np.asarray(problem.sample_gradient(theta, rng, batch_M), dtype=float)
    kind = EstimateKind.SCORE if batch_M == 1 else EstimateKind.BATCHED
    return GradientEstimate(draws.mean(axis=0), batch_M, kind)


def fd_gradient(problem, theta, t: int, cfg: FdConfig, rng: np.random.Generator) -> GradientEstimate:
    """Central finite-difference gradient at radius ``c_t``.

    For every coordinate ``i``, ``M`` pairs of objective draws are taken at
    ``theta +/- c_t e_i`` and their differences averaged.  Under common
    random numbers each pair is generated from one shared block of uniforms.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    q = theta.size
    c = cfg.radius(t)
    M = cfg.batch_M
    offsets = c * np.eye(q)
    points = np.concatenate([theta + offsets, theta - offsets])  # (2q, q)

    if cfg.coupling is Coupling.CRN:
        if not getattr(problem, "supports_crn", False):
            raise UnsupportedCouplingError(
                f"{type(problem).__name__} has no inverse-CDF sampler for common random numbers"
            )
        u = rng.random((q, M) + tuple(problem.uniform_shape))
        g = problem.objective_from_uniforms(points, np.concatenate([u, u]))
    else:
        g = problem.sample_objective(points, rng, M)
    g = np.asarray(g, dtype=float)
    diffs = (g[:q] - g[q:]) / (2.0 * c)  # (q, M)
    return GradientEstimate(diffs.mean(axis=1), 2 * q * M, EstimateKind.FINITE_DIFFERENCE)


def clip(est: GradientEstimate, bound: float) -> GradientEstimate:
    """Bound each component of the estimate to ``[-bound, bound]``."""
    if not bound > 0:
        raise ValueError(f"bound must be positive, got {bound!r}")
    return GradientEstimate(np.clip(est.value, -bound, bound), est.mc_draws, est.kind)
