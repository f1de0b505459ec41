"""Abstract simulation target and simple concrete problems.

An :class:`ExpectationProblem` describes ``M(theta) = E_theta[g_theta(Y)]`` only
through samplers.  All sampling methods are vectorised over a stack of
parameter points ``thetas`` with shape ``(K, q)`` so that finite-difference
and grid evaluations can be batched.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from ..exceptions import UnsupportedCouplingError, UnsupportedEstimatorError


def as_points(thetas, dim: int) -> np.ndarray:
    """Coerce ``thetas`` to a float array of shape ``(K, dim)``."""
    arr = np.asarray(thetas, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size == dim else arr.reshape(-1, 1)
    if arr.shape[-1] != dim:
        raise ValueError(f"expected parameter dimension {dim}, got shape {arr.shape}")
    return arr


class ExpectationProblem:
    """Simulation-only expectation functional.

    Subclasses must set ``dim`` and implement :meth:`sample_objective`.
    The optional capabilities are advertised through class attributes:

    ``has_score``
        :meth:`sample_gradient` returns unbiased draws of the gradient of M.
    ``supports_crn``
        :meth:`objective_from_uniforms` maps uniforms to objective draws by
        inverse-CDF transform, enabling common random numbers.
    ``has_oracle``
        :meth:`mean` returns the closed-form M(theta).
    """

    dim: int = 1
    #: primitive Monte Carlo draws consumed by one objective sample
    draws_per_sample: int = 1
    #: trailing shape of the uniforms consumed by one objective sample
    uniform_shape: tuple[int, ...] = ()
    has_score: bool = False
    supports_crn: bool = False
    has_oracle: bool = False

    def sample_objective(self, thetas, rng: np.random.Generator, size: int) -> np.ndarray:
        """Return ``(K, size)`` independent draws of ``g_theta(Y)``, ``Y ~ P_theta``."""
        raise NotImplementedError

    def objective_from_uniforms(self, thetas, u: np.ndarray) -> np.ndarray:
        """Map uniforms of shape ``(K, size, *uniform_shape)`` to ``(K, size)`` draws."""
        raise UnsupportedCouplingError(
            f"{type(self).__name__} has no inverse-CDF sampler"
        )

    def sample_gradient(self, theta, rng: np.random.Generator, size: int) -> np.ndarray:
        """Return ``(size, q)`` unbiased draws of the gradient of M at ``theta``."""
        raise UnsupportedEstimatorError(
            f"{type(self).__name__} has no unbiased gradient sampler"
        )

    def mean(self, thetas) -> np.ndarray:
        """Closed-form M at each row of ``thetas``."""
        raise NotImplementedError(f"{type(self).__name__} has no closed-form oracle")

    def estimate(self, thetas, rng: np.random.Generator, size: int) -> np.ndarray:
        """Monte Carlo estimate of M at each row of ``thetas`` from ``size`` draws."""
        return self.sample_objective(thetas, rng, size).mean(axis=1)


class Negated(ExpectationProblem):
    """View of a problem with the objective negated, so that minimising it maximises the original."""

    def __init__(self, base: ExpectationProblem) -> None:
        self.base = base
        self.dim = base.dim
        self.draws_per_sample = base.draws_per_sample
        self.uniform_shape = base.uniform_shape
        self.has_score = base.has_score
        self.supports_crn = base.supports_crn
        self.has_oracle = base.has_oracle

    def sample_objective(self, thetas, rng, size):
        return -self.base.sample_objective(thetas, rng, size)

    def objective_from_uniforms(self, thetas, u):
        return -self.base.objective_from_uniforms(thetas, u)

    def sample_gradient(self, theta, rng, size):
        return -self.base.sample_gradient(theta, rng, size)

    def mean(self, thetas):
        return -self.base.mean(thetas)

    def __getattr__(self, name):
        # Delegate problem-specific helpers (e.g. contour bookkeeping).
        if name == "base":
            raise AttributeError(name)
        return getattr(self.base, name)


class QuadraticProblem(ExpectationProblem):
    """``g(Y) = ||Y - center||^2`` with ``Y = theta + noise_sd * Z``.

    With ``noise_sd = 0`` the sampler returns ``theta`` exactly and every
    estimator is deterministic, which makes the problem a convenient
    fixture for checking update arithmetic.
    """

    has_score = True
    supports_crn = True
    has_oracle = True

    def __init__(self, center=(0.0,), noise_sd: float = 0.0) -> None:
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        if noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        self.noise_sd = float(noise_sd)
        self.dim = self.center.size

    def _g(self, y: np.ndarray) -> np.ndarray:
        return np.sum((y - self.center) ** 2, axis=-1)

    def sample_objective(self, thetas, rng, size):
        thetas = as_points(thetas, self.dim)
        z = rng.standard_normal((thetas.shape[0], size, self.dim))
        return self._g(thetas[:, None, :] + self.noise_sd * z)

    def objective_from_uniforms(self, thetas, u):
        thetas = as_points(thetas, self.dim)
        u = np.asarray(u, dtype=float)
        return self._g(thetas[:, None, :] + self.noise_sd * ndtri(u))

    @property
    def uniform_shape(self):
        return (self.dim,)

    def sample_gradient(self, theta, rng, size):
        theta = as_points(theta, self.dim)[0]
        y = theta + self.noise_sd * rng.standard_normal((size, self.dim))
        return 2.0 * (y - self.center)

    def mean(self, thetas):
        thetas = as_points(thetas, self.dim)
        return self._g(thetas) + self.dim * self.noise_sd**2
