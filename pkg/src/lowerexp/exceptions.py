"""Exception types shared across the package."""

from __future__ import annotations


class LowerExpError(Exception):
    """Base class for all errors raised by :mod:`lowerexp`."""


class EstimatorDivergedError(LowerExpError, FloatingPointError):
    """A gradient estimate contained non-finite components."""


class DivergenceError(LowerExpError, FloatingPointError):
    """An iterate became non-finite during a run."""

    def __init__(self, t: int, value) -> None:
        self.t = t
        self.value = value
        super().__init__(f"iterate diverged at t={t}: {value!r}")


class UnsupportedEstimatorError(LowerExpError, NotImplementedError):
    """The problem does not provide the sampler an estimator needs."""


class UnsupportedCouplingError(LowerExpError, NotImplementedError):
    """Common random numbers requested for a problem without inverse-CDF sampling."""


class ConfigError(LowerExpError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, message: str, field: str | None = None) -> None:
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
