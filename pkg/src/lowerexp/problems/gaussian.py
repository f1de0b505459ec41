"""Probability that a shifted Gaussian leaves a symmetric interval."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

from .base import ExpectationProblem, as_points


class GaussianTailProblem(ExpectationProblem):
    """``M(theta) = P(|X| > threshold)`` for ``X ~ N(theta, sigma^2)``.

    The objective does not depend on theta except through the sampling
    distribution, so the score-function gradient is
    ``1{|x| > threshold} * (x - theta) / sigma^2``.  M is even in theta and
    minimised at ``theta = 0``.
    """

    dim = 1
    has_score = True
    supports_crn = True
    has_oracle = True

    def __init__(self, threshold: float = 2.0, sigma: float = 2.0) -> None:
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if threshold < 0:
            raise ValueError("threshold must be non-negative")
        self.threshold = float(threshold)
        self.sigma = float(sigma)

    def _indicator(self, x: np.ndarray) -> np.ndarray:
        return (np.abs(x) > self.threshold).astype(float)

    def sample_objective(self, thetas, rng, size):
        thetas = as_points(thetas, 1)
        x = thetas + self.sigma * rng.standard_normal((thetas.shape[0], size))
        return self._indicator(x)

    def objective_from_uniforms(self, thetas, u):
        thetas = as_points(thetas, 1)
        return self._indicator(thetas + self.sigma * ndtri(np.asarray(u, dtype=float)))

    def sample_gradient(self, theta, rng, size):
        theta = float(as_points(theta, 1)[0, 0])
        x = theta + self.sigma * rng.standard_normal(size)
        h = self._indicator(x) * (x - theta) / self.sigma**2
        return h[:, None]

    def mean(self, thetas):
        t = as_points(thetas, 1)[:, 0]
        a, s = self.threshold, self.sigma
        return ndtr((-a - t) / s) + 1.0 - ndtr((a - t) / s)

    def mean_derivative(self, thetas) -> np.ndarray:
        """Closed-form dM/dtheta."""
        t = as_points(thetas, 1)[:, 0]
        a, s = self.threshold, self.sigma
        pdf = lambda z: np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)  # noqa: E731
        return (pdf((a - t) / s) - pdf((-a - t) / s)) / s


def gaussian_sample_objective(theta: float, rng: np.random.Generator,
                              threshold: float = 2.0, sigma: float = 2.0) -> int:
    """Single draw of ``1{|X| > threshold}`` with ``X ~ N(theta, sigma^2)``."""
    x = theta + sigma * rng.standard_normal()
    return int(abs(x) > threshold)
