"""Stochastic approximation for lower and upper expectations."""

__version__ = "0.1.0"
