"""Named experiment configurations for the two benchmark studies.

Gaussian presets (``gaussian-*``) follow the one-dimensional tail
probability study; ``sim1-*`` and ``sim2-*`` follow the logistic
regression upper-probability study with 3 and 4 predictors.  Values the
original protocol leaves open (projection box, second-order and ADADELTA
step constants, KW gain and start point, evaluation sample size) are
fixed here.
"""

from __future__ import annotations

import copy

GAUSSIAN = {"type": "gaussian", "threshold": 2.0, "sigma": 2.0}
GAUSSIAN_BOX = {"lower": [-7.0], "upper": [7.0]}


def _gauss_rm(epsilon0, iterations, batch_M=1, reps=1000, **extra):
    method = {
        "rule": "rm", "theta0": [6.0], "epsilon0": epsilon0, "tau": 0.5,
        "batch_M": batch_M, "iterations": iterations, "box": GAUSSIAN_BOX,
    }
    method.update(extra)
    return {"problem": dict(GAUSSIAN), "method": method, "replications": reps}


def _sim_kw(sim, N, iterations, reps=200, epsilon0=1.0, theta0="mle"):
    return {
        "problem": {"type": f"logistic-sim{sim}", "contour_N": N, "eval_N": 2000,
                    "assertion_coord": 1},
        "method": {
            "rule": "kw", "theta0": theta0, "epsilon0": epsilon0, "tau": 0.5,
            "c0": 1.0, "gamma": 0.5, "batch_M": 1, "coupling": "crn",
            "iterations": iterations,
        },
        "replications": reps,
    }


def _sim_grid(sim, bounds, points, samples, reps=200):
    return {
        "problem": {"type": f"logistic-sim{sim}", "eval_N": 2000, "assertion_coord": 1},
        "method": {
            "rule": "grid",
            "grid": {"bounds": bounds, "points_per_dim": points, "samples_per_point": samples},
        },
        "replications": reps,
    }


_SIM1_BOUNDS = [[-3, 3], [0, 3], [-3, 3]]
_SIM2_BOUNDS = [[-3, 3], [0, 3], [-3, 3], [-3, 3]]

PRESETS: dict[str, dict] = {
    "gaussian-rm-slow": _gauss_rm(1.0, 1000, reps=1),
    "gaussian-rm-fast": _gauss_rm(5.0, 1000, reps=1),
    "gaussian-rm": _gauss_rm(20.0, 1000),
    "gaussian-rm-batched": _gauss_rm(20.0, 100, batch_M=10),
    "gaussian-grid": {
        "problem": dict(GAUSSIAN),
        "method": {"rule": "grid", "grid": {"bounds": [[-6, 6]], "points_per_dim": [100],
                                            "samples_per_point": 10}},
        "replications": 1000,
    },
    "gaussian-newton": _gauss_rm(1.0, 1000, batch_M=50, reps=100, rule="newton", window=100),
    "gaussian-adadelta": {
        **_gauss_rm(1.0, 10000),
        "trajectory_every": 10,
    },
    "gaussian-decay": _gauss_rm(20.0, 5000, reps=200, tau=0.75),
    "sim1-kw-n16": _sim_kw(1, 16, 1250),
    "sim1-kw-n40": _sim_kw(1, 40, 500),
    "sim1-grid": _sim_grid(1, _SIM1_BOUNDS, [15, 15, 15], 36),
    "sim2-kw-n16": _sim_kw(2, 16, 1250),
    "sim2-kw-n40": _sim_kw(2, 40, 500),
    "sim2-grid": _sim_grid(2, _SIM2_BOUNDS, [10, 10, 10, 10], 16),
    # Large-gain variants; with epsilon0 = 30 the first steps leave the
    # region where the contour is positive and the iterates stall there.
    "sim1-kw-n16-large-gain": _sim_kw(1, 16, 1250, epsilon0=30.0, theta0="constrained_mle"),
    "sim2-kw-n16-large-gain": _sim_kw(2, 16, 1250, epsilon0=30.0, theta0="constrained_mle"),
}
PRESETS["gaussian-adadelta"]["method"].update(rule="adadelta", rho=0.995, eta=1e-6)


def get_preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
