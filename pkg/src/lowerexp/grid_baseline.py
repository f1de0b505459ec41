"""Grid-search Monte Carlo baseline.

``M`` is estimated by a sample mean of ``N`` objective draws at every point
of a rectangular lattice and the extremal lattice point is reported.  Each
grid point gets its own RNG substream so results do not depend on how the
lattice is chunked.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Lattice with inclusive, equally spaced endpoints in each dimension."""

    bounds: tuple
    points_per_dim: tuple
    samples_per_point: int

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        ppd = tuple(int(p) for p in self.points_per_dim)
        if len(bounds) != len(ppd):
            raise ValueError("bounds and points_per_dim must have equal length")
        if any(p < 1 for p in ppd):
            raise ValueError("points_per_dim entries must be positive")
        if any(lo > hi for lo, hi in bounds):
            raise ValueError("each lower bound must not exceed its upper bound")
        if self.samples_per_point < 1:
            raise ValueError("samples_per_point must be positive")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "points_per_dim", ppd)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def size(self) -> int:
        return int(np.prod(self.points_per_dim))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, p) if p > 1 else np.array([(lo + hi) / 2])
                for (lo, hi), p in zip(self.bounds, self.points_per_dim)]

    def points(self) -> np.ndarray:
        """Lattice points in lexicographic index order, shape ``(J, q)``."""
        return np.array(list(itertools.product(*self.axes())), dtype=float).reshape(self.size, self.dim)

    def budget(self, draws_per_sample: int = 1) -> int:
        return self.size * self.samples_per_point * int(draws_per_sample)


@dataclass
class GridResult:
    theta_best: np.ndarray
    value_best: float
    index_best: int
    points: np.ndarray
    values: np.ndarray
    draws: int

    @property
    def all_values(self) -> dict:
        return {tuple(p): float(v) for p, v in zip(self.points, self.values)}

    def write_csv(self, path) -> None:
        """Per-point estimates with columns ``grid_index, theta_1..theta_q, m_hat``."""
        q = self.points.shape[1]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["grid_index", *[f"theta_{i + 1}" for i in range(q)], "m_hat"])
            for j, (p, v) in enumerate(zip(self.points, self.values)):
                w.writerow([j, *map(repr, p.tolist()), repr(float(v))])


def grid_search(problem, spec: GridSpec, mode: str = "min", rng=None,
                chunk: int = 256) -> GridResult:
    """Evaluate ``M_hat`` on the lattice and return its minimum or maximum.

    Ties go to the lowest lattice index.
    """
    if mode not in ("min", "max"):
        raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
    if spec.dim != problem.dim:
        raise ValueError(f"grid has dimension {spec.dim}, problem has {problem.dim}")
    rng = np.random.default_rng(rng)
    points = spec.points()
    J, N = spec.size, spec.samples_per_point
    streams = np.random.SeedSequence(int(rng.integers(2**63))).spawn(J)
    values = np.empty(J)
    crn = getattr(problem, "supports_crn", False)
    ushape = tuple(getattr(problem, "uniform_shape", ()))
    for s in range(0, J, chunk):
        block = slice(s, min(J, s + chunk))
        if crn:
            u = np.stack([np.random.default_rng(ss).random((N,) + ushape) for ss in streams[block]])
            values[block] = np.asarray(problem.objective_from_uniforms(points[block], u)).mean(axis=1)
        else:
            for j in range(block.start, block.stop):
                g = problem.sample_objective(points[j:j + 1], np.random.default_rng(streams[j]), N)
                values[j] = float(np.mean(g))
    j = int(np.argmin(values) if mode == "min" else np.argmax(values))
    draws = spec.budget(getattr(problem, "draws_per_sample", 1))
    return GridResult(points[j].copy(), float(values[j]), j, points, values, draws)
