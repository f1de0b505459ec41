"""Plausibility contour for logistic regression.

The discrepancy statistic is the log-likelihood ratio
``T(y, theta) = l(theta_hat_y) - l(theta)`` and the contour is
``pi(theta; y_obs) = P_theta{T(Y, theta) > T(y_obs, theta)}``.  Every
simulated dataset needs its own maximum likelihood fit, so the fitting
routine here is vectorised over a batch of response vectors sharing one
design matrix.

Separable data (no finite MLE) are common for small designs.  Fits that
fail report ``converged=False`` and keep the last Newton iterate; the
log-likelihood there stands in for the supremum when computing T.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..sa_core import BoxConstraint
from .base import ExpectationProblem, Negated, as_points

MLE_TOL = 1e-8
MLE_MAX_ITER = 100
DIVERGENCE_NORM = 1e3
# Smallest Hessian eigenvalue accepted at a converged fit; below it the
# likelihood is flat along some direction, i.e. the data are separable.
SINGULAR_EIG = 1e-6

SIM1_THETA_STAR = (-2.0, -1.0, 2.0)
SIM2_THETA_STAR = (-2.0, -1.0, 2.0, 1.0)


@dataclass(frozen=True)
class MleResult:
    theta_hat: np.ndarray
    loglik: float
    converged: bool
    iterations: int


def full_factorial_design(levels, q: int) -> np.ndarray:
    """One row per combination of ``q`` predictors taking values in ``levels``.

    Rows are in lexicographic order of the level indices (last column varies
    fastest).
    """
    levels = [float(v) for v in levels]
    return np.array(list(itertools.product(levels, repeat=q)), dtype=float)


def sim1_design() -> np.ndarray:
    return full_factorial_design([0, 1 / 3, 2 / 3, 1], 3)


def sim2_design() -> np.ndarray:
    return full_factorial_design([0, 1 / 2, 1], 4)


def loglik(design: np.ndarray, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Bernoulli log-likelihood; broadcasts over leading axes of ``y`` and ``theta``."""
    eta = np.asarray(theta, dtype=float) @ design.T
    return np.sum(y * eta - np.logaddexp(0.0, eta), axis=-1)


def fit_logistic_batch(design: np.ndarray, Y: np.ndarray, *, tol: float = MLE_TOL,
                       max_iter: int = MLE_MAX_ITER):
    """Newton-Raphson MLE for each row of ``Y`` (shape ``(B, n)``), started at 0.

    Steps are halved until the log-likelihood does not decrease.  Returns
    ``(theta, loglik, converged, iterations)`` arrays over the batch.
    """
    X = np.asarray(design, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[None, :]
    B, n = Y.shape
    q = X.shape[1]
    theta = np.zeros((B, q))
    ll = np.full(B, -n * np.log(2.0))
    converged = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=int)

    ybar = Y.mean(axis=1)
    active = (ybar > 0) & (ybar < 1)  # all-0 / all-1 responses have no MLE

    for it in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        th = theta[idx]
        p = expit(th @ X.T)
        grad = (Y[idx] - p) @ X
        done = np.max(np.abs(grad), axis=1) < tol
        if done.any():
            converged[idx[done]] = True
            active[idx[done]] = False
        if it == max_iter:
            break
        keep = ~done
        idx, th, p, grad = idx[keep], th[keep], p[keep], grad[keep]
        if idx.size == 0:
            break
        w = p * (1.0 - p)
        H = np.einsum("bn,ni,nj->bij", w, X, X)
        step = _solve_batch(H, grad)
        bad = ~np.all(np.isfinite(step), axis=1)
        if bad.any():
            active[idx[bad]] = False
            idx, th, step = idx[~bad], th[~bad], step[~bad]
        ll_old = ll[idx]
        scale = np.ones(idx.size)
        cand = th + step
        ll_new = loglik(X, Y[idx], cand)
        for _ in range(30):
            worse = ll_new < ll_old - 1e-12 * np.abs(ll_old)
            if not worse.any():
                break
            scale[worse] *= 0.5
            cand[worse] = th[worse] + scale[worse, None] * step[worse]
            ll_new[worse] = loglik(X, Y[idx[worse]], cand[worse])
        theta[idx] = cand
        ll[idx] = ll_new
        iters[idx] += 1
        blown = np.linalg.norm(cand, axis=1) > DIVERGENCE_NORM
        if blown.any():
            active[idx[blown]] = False

    # A gradient can vanish along a separating direction; reject flat fits.
    ok = np.flatnonzero(converged)
    if ok.size:
        p = expit(theta[ok] @ X.T)
        H = np.einsum("bn,ni,nj->bij", p * (1.0 - p), X, X)
        flat = np.linalg.eigvalsh(H)[:, 0] < SINGULAR_EIG
        converged[ok[flat]] = False
    return theta, ll, converged, iters


def _solve_batch(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(H, g[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.full_like(g, np.nan)
        for b in range(H.shape[0]):
            try:
                out[b] = np.linalg.solve(H[b], g[b])
            except np.linalg.LinAlgError:
                pass
        return out


def logistic_mle(design, y) -> MleResult:
    """Unconstrained maximum likelihood fit of one response vector."""
    X = np.asarray(design, dtype=float)
    if X.shape[0] < X.shape[1]:
        raise ValueError("need at least as many observations as coefficients")
    theta, ll, conv, it = fit_logistic_batch(X, np.asarray(y, dtype=float)[None, :])
    return MleResult(theta[0], float(ll[0]), bool(conv[0]), int(it[0]))


def constrained_mle(design, y, coord: int) -> MleResult:
    """MLE subject to ``theta[coord] >= 0``.

    A single box constraint is either inactive (the unconstrained fit is
    returned) or active, in which case ``theta[coord] = 0`` exactly and the
    remaining coefficients are refitted.
    """
    X = np.asarray(design, dtype=float)
    free = logistic_mle(X, y)
    if free.theta_hat[coord] >= 0:
        return free
    cols = [i for i in range(X.shape[1]) if i != coord]
    sub = logistic_mle(X[:, cols], y)
    theta = np.zeros(X.shape[1])
    theta[cols] = sub.theta_hat
    return MleResult(theta, float(loglik(X, np.asarray(y, float), theta)),
                     sub.converged, free.iterations + sub.iterations)


def likelihood_ratio_T(design, y, theta, mle: MleResult | None = None) -> float:
    """``T(y, theta) = l(theta_hat_y) - l(theta)``, clipped below at 0.

    When the MLE does not exist the log-likelihood at the last Newton iterate
    is used in place of ``l(theta_hat_y)``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if mle is None:
        mle = logistic_mle(X, y)
    return max(0.0, mle.loglik - float(loglik(X, y, np.asarray(theta, float))))


def logistic_simulate(design, theta, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli responses with ``p_i = F(x_i . theta)``, via ``1{U_i < p_i}``."""
    X = np.asarray(design, dtype=float)
    p = expit(X @ np.asarray(theta, dtype=float))
    return (rng.random(p.shape) < p).astype(np.int8)


@dataclass
class FitStats:
    """Running count of simulated-dataset fits and how many had no MLE."""

    fits: int = 0
    failures: int = 0

    @property
    def failure_rate(self) -> float:
        return self.failures / self.fits if self.fits else 0.0


@dataclass(eq=False)
class LogisticIMProblem(ExpectationProblem):
    """Plausibility contour of a logistic regression model as an expectation.

    One objective sample is a contour estimate from ``contour_N`` simulated
    datasets, so it consumes ``contour_N * n`` Bernoulli draws.
    """

    design: np.ndarray
    y_obs: np.ndarray
    theta_star: np.ndarray | None = None
    assertion_coord: int = 1
    contour_N: int = 16
    max_batch: int = 20_000
    stats: FitStats = field(default_factory=FitStats)

    has_score = False
    supports_crn = True
    has_oracle = False

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        self.y_obs = np.asarray(self.y_obs, dtype=float)
        n, q = self.design.shape
        if self.y_obs.shape != (n,):
            raise ValueError(f"y_obs must have length {n}")
        if self.contour_N < 1:
            raise ValueError("contour_N must be positive")
        if not 0 <= self.assertion_coord < q:
            raise ValueError("assertion_coord out of range")
        self.dim = q
        self.n = n
        self.draws_per_sample = self.contour_N * n
        self.uniform_shape = (self.contour_N, n)
        self.obs_mle = logistic_mle(self.design, self.y_obs)

    @classmethod
    def simulated(cls, sim: int, rng: np.random.Generator, contour_N: int = 16,
                  **kw) -> "LogisticIMProblem":
        """Problem for one of the two benchmark designs with ``y_obs`` drawn at the truth."""
        if sim == 1:
            design, star = sim1_design(), np.array(SIM1_THETA_STAR)
        elif sim == 2:
            design, star = sim2_design(), np.array(SIM2_THETA_STAR)
        else:
            raise ValueError(f"unknown simulation {sim!r}")
        y = logistic_simulate(design, star, rng)
        return cls(design, y, theta_star=star, contour_N=contour_N, **kw)

    def with_contour_N(self, contour_N: int) -> "LogisticIMProblem":
        return LogisticIMProblem(self.design, self.y_obs, self.theta_star,
                                 self.assertion_coord, contour_N, self.max_batch)

    def T_obs(self, thetas) -> np.ndarray:
        """Observed statistic ``T(y_obs, theta)`` at each row of ``thetas``."""
        thetas = as_points(thetas, self.dim)
        return np.maximum(0.0, self.obs_mle.loglik - loglik(self.design, self.y_obs, thetas))

    def constrained_mle(self) -> MleResult:
        return constrained_mle(self.design, self.y_obs, self.assertion_coord)

    def _exceed(self, thetas: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Indicators ``1{T(Y, theta) > T(y_obs, theta)}`` for uniforms ``u`` of shape ``(K, S, n)``."""
        K, S, n = u.shape
        eta = thetas @ self.design.T
        Y = (u < expit(eta)[:, None, :]).astype(float)
        flat = Y.reshape(K * S, n)
        _, ll_hat, conv, _ = fit_logistic_batch(self.design, flat)
        self.stats.fits += flat.shape[0]
        self.stats.failures += int(np.count_nonzero(~conv))
        ll_theta = np.sum(Y * eta[:, None, :] - np.logaddexp(0.0, eta)[:, None, :], axis=-1)
        T_sim = np.maximum(0.0, ll_hat.reshape(K, S) - ll_theta)
        return (T_sim > self.T_obs(thetas)[:, None]).astype(float)

    def objective_from_uniforms(self, thetas, u):
        thetas = as_points(thetas, self.dim)
        u = np.asarray(u, dtype=float)
        K, size = u.shape[:2]
        N, n = self.contour_N, self.n
        u = u.reshape(K, size * N, n)
        # Bound the number of simultaneous fits by chunking over datasets.
        chunk = max(1, self.max_batch // max(1, K))
        out = np.empty((K, size * N))
        for s in range(0, size * N, chunk):
            out[:, s:s + chunk] = self._exceed(thetas, u[:, s:s + chunk])
        return out.reshape(K, size, N).mean(axis=2)

    def sample_objective(self, thetas, rng, size):
        thetas = as_points(thetas, self.dim)
        K = thetas.shape[0]
        per_point = size * self.draws_per_sample
        if K * per_point <= self.max_batch * self.n:
            u = rng.random((K, size) + self.uniform_shape)
            return self.objective_from_uniforms(thetas, u)
        # Large grids: evaluate in blocks of parameter points.
        block = max(1, (self.max_batch * self.n) // per_point)
        out = np.empty((K, size))
        for s in range(0, K, block):
            th = thetas[s:s + block]
            u = rng.random((th.shape[0], size) + self.uniform_shape)
            out[s:s + block] = self.objective_from_uniforms(th, u)
        return out


def contour_estimate(problem: LogisticIMProblem, theta, N: int,
                     rng: np.random.Generator) -> float:
    """Monte Carlo plausibility ``N^{-1} sum_j 1{T(Y_j, theta) > T(y_obs, theta)}``."""
    if N < 1:
        raise ValueError("N must be positive")
    theta = as_points(theta, problem.dim)
    u = rng.random((1, N, problem.n))
    return float(problem._exceed(theta, u).mean())


def upper_probability_objective(problem: LogisticIMProblem):
    """Maximisation target for ``sup_{theta in A} pi(theta; y_obs)``.

    Returns the negated problem (so the engine's minimisation maximises the
    contour) and the closure of ``A = {theta_j > 0}`` as a box.
    """
    q = problem.dim
    lower = np.full(q, -np.inf)
    lower[problem.assertion_coord] = 0.0
    return Negated(problem), BoxConstraint(lower, np.full(q, np.inf))
