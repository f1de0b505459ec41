"""Robbins-Monro style update engine.

The engine always minimises.  A run draws one gradient estimate per
iteration, optionally clips it, applies one of four update rules
(plain Robbins-Monro, Kiefer-Wolfowitz, stochastic quasi-Newton, ADADELTA),
optionally projects onto a box and records the result.  There is no
stopping rule: exactly ``iterations`` updates are made.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import FdConfig, clip, fd_gradient, score_gradient
from .exceptions import DivergenceError, EstimatorDivergedError

CURVATURE_TOL = 1e-12


class ScheduleKind(enum.Enum):
    POWER_LAW = "power"
    CONSTANT = "constant"


class UpdateRule(enum.Enum):
    RM = "rm"
    KW = "kw"
    NEWTON = "newton"
    ADADELTA = "adadelta"


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``epsilon0 * t**-tau`` (power law) or ``epsilon0`` (constant)."""

    epsilon0: float
    tau: float = 0.5
    kind: ScheduleKind = ScheduleKind.POWER_LAW

    def __post_init__(self):
        if not isinstance(self.kind, ScheduleKind):
            object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not (math.isfinite(self.epsilon0) and self.epsilon0 > 0):
            raise ValueError(f"epsilon0 must be positive and finite, got {self.epsilon0!r}")
        if self.kind is ScheduleKind.POWER_LAW and not 0 < self.tau <= 1:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau!r}")

    def satisfies_decay(self) -> bool:
        """True when the steps are non-summable but square-summable."""
        return self.kind is ScheduleKind.POWER_LAW and 0.5 < self.tau <= 1

    def __call__(self, t: int) -> float:
        return step_size(self, t)


def step_size(schedule: StepSchedule, t: int) -> float:
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if schedule.kind is ScheduleKind.CONSTANT:
        return float(schedule.epsilon0)
    return schedule.epsilon0 * t ** (-schedule.tau)


@dataclass(frozen=True)
class BoxConstraint:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds must have the same length")
        if not np.all(lo < hi):
            raise ValueError("each lower bound must be strictly below its upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all((theta >= self.lower) & (theta <= self.upper)))


def project(theta, box: BoxConstraint) -> np.ndarray:
    """Euclidean projection onto a box, i.e. a componentwise clamp."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != box.dim:
        raise ValueError(f"dimension mismatch: theta has {theta.shape[-1]}, box has {box.dim}")
    return np.minimum(box.upper, np.maximum(box.lower, theta))


@dataclass
class Trajectory:
    """Iterates of one run together with their running and windowed means.

    ``window`` is the length ``k`` of the moving average; ``None`` means
    all iterates.
    """

    dim: int
    window: int | None = None
    running_mean: np.ndarray | None = None
    samples_used: int = 0
    _iterates: list = field(default_factory=list, repr=False)
    _means: list = field(default_factory=list, repr=False)
    step_sizes: list = field(default_factory=list, repr=False)
    samples_cum: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self._iterates)

    @property
    def iterates(self) -> np.ndarray:
        return np.array(self._iterates).reshape(len(self), self.dim)

    @property
    def running_means(self) -> np.ndarray:
        """Running mean after each step, shape ``(T, q)``."""
        return np.array(self._means).reshape(len(self), self.dim)

    @property
    def final(self) -> np.ndarray:
        return self._iterates[-1]

    @property
    def window_mean(self) -> np.ndarray:
        if not self._iterates:
            raise ValueError("empty trajectory")
        k = len(self) if self.window is None else min(self.window, len(self))
        return np.mean(np.array(self._iterates[-k:]), axis=0)


def update_average(traj: Trajectory, theta_new, step_size: float = math.nan,
                   draws: int = 0) -> Trajectory:
    """Append an iterate and update the running mean in place."""
    theta_new = np.array(theta_new, dtype=float).reshape(-1)
    if theta_new.size != traj.dim:
        raise ValueError(f"expected dimension {traj.dim}, got {theta_new.size}")
    traj._iterates.append(theta_new)
    t = len(traj._iterates)
    if traj.running_mean is None:
        traj.running_mean = theta_new.copy()
    else:
        traj.running_mean = traj.running_mean + (theta_new - traj.running_mean) / t
    traj._means.append(traj.running_mean)
    traj.samples_used += int(draws)
    traj.step_sizes.append(float(step_size))
    traj.samples_cum.append(traj.samples_used)
    return traj


def _check_grad(grad) -> np.ndarray:
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise EstimatorDivergedError(f"non-finite gradient estimate: {grad!r}")
    return grad


def rm_step(theta, grad_sample, eps: float) -> np.ndarray:
    """One descent step ``theta - eps * X``."""
    theta = np.asarray(theta, dtype=float)
    grad = _check_grad(grad_sample)
    if theta.shape != grad.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape}, gradient {grad.shape}")
    return theta - eps * grad


@dataclass
class BfgsState:
    """Inverse-Hessian estimate plus the previous point and gradient."""

    Z: np.ndarray
    prev_theta: np.ndarray | None = None
    prev_grad: np.ndarray | None = None
    resets: int = 0
    skipped: int = 0

    @classmethod
    def initial(cls, dim: int) -> "BfgsState":
        return cls(np.eye(dim))


def bfgs_update(Z: np.ndarray, delta: np.ndarray, gamma: np.ndarray) -> np.ndarray | None:
    """BFGS inverse-Hessian refresh; ``None`` when the curvature ``delta.gamma`` is negligible."""
    delta = np.asarray(delta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    s = float(delta @ gamma)
    if abs(s) < CURVATURE_TOL:
        return None
    A = np.eye(delta.size) - np.outer(gamma, delta) / s
    Z_new = A.T @ Z @ A + np.outer(delta, delta) / s
    # Symmetrise to remove rounding asymmetry.
    return 0.5 * (Z_new + Z_new.T)


def newton_step(theta, grad_sample, state: BfgsState, eps: float):
    """Quasi-Newton step ``theta - eps * Z @ Y``.

    The refresh of ``Z`` from the previous call's point and gradient happens
    here, once the new gradient is known.  A non-finite refreshed ``Z`` is
    replaced by the identity and counted in ``state.resets``.
    """
    theta = np.asarray(theta, dtype=float)
    grad = _check_grad(grad_sample)
    Z = state.Z
    resets, skipped = state.resets, state.skipped
    if state.prev_theta is not None:
        Z_new = bfgs_update(Z, theta - state.prev_theta, grad - state.prev_grad)
        if Z_new is None:
            skipped += 1
        elif not np.all(np.isfinite(Z_new)):
            Z = np.eye(theta.size)
            resets += 1
        else:
            Z = Z_new
    theta_new = theta - eps * (Z @ grad)
    return theta_new, BfgsState(Z, theta.copy(), grad.copy(), resets, skipped)


@dataclass
class AdadeltaState:
    rho: float
    eta: float
    S: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho!r}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta!r}")

    @classmethod
    def initial(cls, dim: int, rho: float = 0.995, eta: float = 1e-6) -> "AdadeltaState":
        return cls(rho, eta, np.zeros(dim), np.zeros(dim))


def adadelta_step(theta, grad_sample, state: AdadeltaState):
    """ADADELTA update with ``RMS(x) = sqrt(x + eta)`` applied to the accumulators."""
    theta = np.asarray(theta, dtype=float)
    y = _check_grad(grad_sample)
    rho, eta = state.rho, state.eta
    S = rho * state.S + (1 - rho) * y**2
    delta = -np.sqrt(state.D + eta) / np.sqrt(S + eta) * y
    D = rho * state.D + (1 - rho) * delta**2
    return theta + delta, AdadeltaState(rho, eta, S, D)


def run(problem, theta0, rule="rm", schedule: StepSchedule | None = None, *,
        iterations: int, rng=None, box: BoxConstraint | None = None,
        batch_size: int = 1, clip_bound: float | None = None,
        window: int | None = None, fd: FdConfig | None = None,
        estimator: str | None = None, rho: float = 0.995,
        eta: float = 1e-6) -> Trajectory:
    """Run ``iterations`` updates from ``theta0`` and return the trajectory.

    Gradients come from the score-function estimator when the problem has
    one, else from finite differences; the ``kw`` rule and
    ``estimator="fd"`` force finite differences.  ``batch_size`` is the
    number of Monte Carlo replicates averaged per gradient (for finite
    differences it is ``fd.batch_M`` when ``fd`` is given).  The default
    moving-average window is a tenth of the run.
    """
    rule = UpdateRule(rule)
    if schedule is None:
        schedule = StepSchedule(1.0, 0.5)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.default_rng(rng)
    theta = np.array(theta0, dtype=float).reshape(-1)
    if theta.size != problem.dim:
        raise ValueError(f"theta0 has dimension {theta.size}, problem has {problem.dim}")
    if box is not None:
        if box.dim != theta.size:
            raise ValueError("box dimension does not match theta0")
        theta = project(theta, box)

    if estimator not in (None, "score", "fd"):
        raise ValueError(f"unknown estimator {estimator!r}")
    use_fd = (rule is UpdateRule.KW or estimator == "fd"
              or (estimator is None and not getattr(problem, "has_score", False)))
    if fd is None:
        fd = FdConfig(batch_M=batch_size)
    draws_per_sample = int(getattr(problem, "draws_per_sample", 1))

    traj = Trajectory(theta.size, window=window or max(1, iterations // 10))
    bfgs = BfgsState.initial(theta.size)
    ada = AdadeltaState.initial(theta.size, rho, eta)

    for t in range(1, iterations + 1):
        eps = step_size(schedule, t)
        if use_fd:
            est = fd_gradient(problem, theta, t, fd, rng)
        else:
            est = score_gradient(problem, theta, rng, batch_size)
        if clip_bound is not None:
            est = clip(est, clip_bound)

        if rule is UpdateRule.NEWTON:
            new, bfgs = newton_step(theta, est.value, bfgs, eps)
        elif rule is UpdateRule.ADADELTA and t > 1:
            d_prev = ada.D
            new, ada = adadelta_step(theta, est.value, ada)
            # Record the effective (coordinate-averaged) adaptive step.
            eps = float(np.mean(np.sqrt(d_prev + eta) / np.sqrt(ada.S + eta)))
        else:
            new = rm_step(theta, est.value, eps)

        if box is not None:
            new = project(new, box)
        if not np.all(np.isfinite(new)):
            raise DivergenceError(t, new)
        theta = new
        update_average(traj, theta, eps, est.mc_draws * draws_per_sample)
    return traj


@dataclass(frozen=True)
class PilotResult:
    epsilon0: float
    qualified: bool
    ranges: tuple


def pilot_select_epsilon0(problem, theta0, candidates, *, variation_threshold: float,
                          pilot_iters: int = 10, rng_seed: int | None = None, rule="rm",
                          tau: float = 0.5,
                          **run_kwargs) -> PilotResult:
    """Choose the smallest leading step constant whose pilot run moves enough.

    Each candidate is run for ``pilot_iters`` iterations from ``theta0`` with
    the same seed.  The variation of a pilot is the largest per-coordinate
    range over ``theta0`` and its iterates.  If no candidate reaches
    ``variation_threshold`` the largest is returned with ``qualified=False``.
    """
    candidates = [float(c) for c in candidates]
    if not candidates:
        raise ValueError("candidate list is empty")
    if any(b <= a for a, b in zip(candidates, candidates[1:])):
        raise ValueError("candidates must be strictly increasing")
    if pilot_iters < 2:
        raise ValueError("pilot_iters must be at least 2")
    if not variation_threshold > 0:
        raise ValueError("variation_threshold must be positive")
    seed = np.random.SeedSequence().entropy if rng_seed is None else rng_seed

    start = np.array(theta0, dtype=float).reshape(1, -1)
    ranges = []
    for eps0 in candidates:
        traj = run(problem, theta0, rule, StepSchedule(eps0, tau), iterations=pilot_iters,
                   rng=np.random.default_rng(seed), **run_kwargs)
        path = np.vstack([start, traj.iterates])
        spread = float(np.max(path.max(axis=0) - path.min(axis=0)))
        ranges.append(spread)
        if spread >= variation_threshold:
            return PilotResult(eps0, True, tuple(ranges))
    return PilotResult(candidates[-1], False, tuple(ranges))
