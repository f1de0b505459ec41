"""Experiment orchestration: configs, seeded replications, budgets and CSV output.

Replication ``r`` of an experiment with base seed ``s`` draws from three
independent streams, ``SeedSequence(s, spawn_key=(r, k))`` for
``k = 0`` (observed data), ``1`` (the optimiser) and ``2`` (evaluation of
the reported estimates).  Experiments that share a base seed therefore see
the same observed datasets whatever method they run, and replications can
be executed in any order or in parallel.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .estimators import Coupling, FdConfig
from .exceptions import ConfigError, LowerExpError
from .grid_baseline import GridSpec, grid_search
from .problems import (
    GaussianTailProblem,
    LogisticIMProblem,
    Negated,
    QuadraticProblem,
    contour_estimate,
)
from .sa_core import BoxConstraint, StepSchedule, run

log = logging.getLogger(__name__)

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_BOUND_VEC = {"type": "array", "items": {"type": ["number", "null"]}, "minItems": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "lowerexp experiment",
    "type": "object",
    "required": ["problem", "method"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "problem": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["gaussian", "logistic-sim1", "logistic-sim2", "quadratic"]},
                "threshold": {"type": "number", "minimum": 0},
                "sigma": _POS,
                "contour_N": _POS_INT,
                "eval_N": _POS_INT,
                "assertion_coord": {"type": "integer", "minimum": 0},
                "center": _VEC,
                "noise_sd": {"type": "number", "minimum": 0},
            },
        },
        "method": {
            "type": "object",
            "required": ["rule"],
            "additionalProperties": False,
            "properties": {
                "rule": {"enum": ["rm", "kw", "newton", "adadelta", "grid"]},
                "objective": {"enum": ["min", "max"]},
                "theta0": {"oneOf": [_VEC, {"enum": ["constrained_mle", "mle", "truth"]}]},
                "epsilon0": _POS,
                "tau": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "schedule": {"enum": ["power", "constant"]},
                "c0": _POS,
                "gamma": {"type": "number", "minimum": 0},
                "batch_M": _POS_INT,
                "coupling": {"enum": ["independent", "crn"]},
                "estimator": {"enum": ["score", "fd", None]},
                "iterations": _POS_INT,
                "window": {"type": ["integer", "null"], "minimum": 1},
                "clip": {"oneOf": [_POS, {"type": "null"}]},
                "box": {
                    "oneOf": [
                        {"type": "null"},
                        {"type": "object", "required": ["lower", "upper"],
                         "additionalProperties": False,
                         "properties": {"lower": _BOUND_VEC, "upper": _BOUND_VEC}},
                    ]
                },
                "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "eta": _POS,
                "grid": {
                    "type": "object",
                    "required": ["bounds", "points_per_dim", "samples_per_point"],
                    "additionalProperties": False,
                    "properties": {
                        "bounds": {"type": "array", "minItems": 1,
                                   "items": {"type": "array", "items": _NUM,
                                             "minItems": 2, "maxItems": 2}},
                        "points_per_dim": {"type": "array", "items": _POS_INT, "minItems": 1},
                        "samples_per_point": _POS_INT,
                    },
                },
            },
        },
        "replications": _POS_INT,
        "base_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output": {"type": ["string", "null"]},
        "workers": _POS_INT,
        "trajectory_every": _POS_INT,
        "write_trajectories": {"type": "boolean"},
    },
}

PROBLEM_DEFAULTS = {
    "gaussian": {"threshold": 2.0, "sigma": 2.0, "eval_N": 100_000},
    "logistic-sim1": {"contour_N": 16, "eval_N": 2000, "assertion_coord": 1},
    "logistic-sim2": {"contour_N": 16, "eval_N": 2000, "assertion_coord": 1},
    "quadratic": {"center": [0.0], "noise_sd": 0.0, "eval_N": 10_000},
}
METHOD_DEFAULTS = {
    "epsilon0": 1.0, "tau": 0.5, "schedule": "power", "c0": 1.0, "gamma": 0.5,
    "batch_M": 1, "coupling": "independent", "estimator": None, "iterations": 1000,
    "window": None, "clip": None, "box": None, "rho": 0.995, "eta": 1e-6,
}
TOP_DEFAULTS = {
    "name": "", "replications": 1, "base_seed": 0, "output": None, "workers": 1,
    "trajectory_every": 1, "write_trajectories": True,
}
_DESIGN_SHAPE = {"logistic-sim1": (64, 3), "logistic-sim2": (81, 4)}


def validate_config(raw: dict) -> dict:
    """Validate against :data:`CONFIG_SCHEMA` and fill in defaults.

    Raises :class:`ConfigError` naming the offending field.
    """
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(exc.message, where) from None
    cfg = {**TOP_DEFAULTS, **copy.deepcopy(raw)}
    ptype = cfg["problem"]["type"]
    cfg["problem"] = {**PROBLEM_DEFAULTS[ptype], **cfg["problem"]}
    method = {**METHOD_DEFAULTS, **cfg["method"]}
    method.setdefault("objective", "max" if ptype.startswith("logistic") else "min")
    cfg["method"] = method

    dim = problem_dim(cfg)
    rule = method["rule"]
    if ptype.startswith("logistic") and not 0 <= cfg["problem"]["assertion_coord"] < dim:
        raise ConfigError(f"must be below {dim}", "problem.assertion_coord")
    if rule == "grid":
        if "grid" not in method:
            raise ConfigError("grid rule needs a 'grid' block", "method.grid")
        g = method["grid"]
        if len(g["bounds"]) != dim or len(g["points_per_dim"]) != dim:
            raise ConfigError(f"grid must have {dim} dimensions", "method.grid")
        if any(lo > hi for lo, hi in g["bounds"]):
            raise ConfigError("lower bound exceeds upper bound", "method.grid.bounds")
    else:
        theta0 = method.get("theta0")
        if theta0 is None:
            raise ConfigError("iterative rules need a starting point", "method.theta0")
        if isinstance(theta0, str):
            if not ptype.startswith("logistic"):
                raise ConfigError(f"{theta0!r} is only available for logistic problems",
                                  "method.theta0")
        elif len(theta0) != dim:
            raise ConfigError(f"expected {dim} values", "method.theta0")
        box = method["box"]
        if box is not None:
            if len(box["lower"]) != dim or len(box["upper"]) != dim:
                raise ConfigError(f"bounds must have {dim} values", "method.box")
            try:
                _box(box)
            except ValueError as exc:
                raise ConfigError(str(exc), "method.box") from None
        if rule in ("rm", "newton", "adadelta") and method["estimator"] != "fd" \
                and ptype.startswith("logistic"):
            method["estimator"] = "fd"
    return cfg


def load_config(source) -> dict:
    """Load a config from a JSON path or a preset name, then validate it."""
    from .presets import PRESETS, get_preset

    if isinstance(source, dict):
        return validate_config(source)
    path = Path(source)
    if path.is_file():
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", str(path)) from None
    elif str(source) in PRESETS:
        raw = get_preset(str(source))
        raw.setdefault("name", str(source))
    else:
        raise ConfigError(f"no such file or preset: {source}", "config")
    return validate_config(raw)


def problem_dim(cfg: dict) -> int:
    p = cfg["problem"]
    if p["type"] == "gaussian":
        return 1
    if p["type"] == "quadratic":
        return len(p["center"])
    return _DESIGN_SHAPE[p["type"]][1]


def _box(spec) -> BoxConstraint:
    lo = [-math.inf if v is None else v for v in spec["lower"]]
    hi = [math.inf if v is None else v for v in spec["upper"]]
    return BoxConstraint(lo, hi)


def derive_streams(base_seed: int, replication: int) -> tuple[np.random.Generator, ...]:
    """Data, optimiser and evaluation generators for one replication."""
    return tuple(
        np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(replication, k)))
        for k in range(3)
    )


def build_problem(pcfg: dict, rng: np.random.Generator):
    kind = pcfg["type"]
    if kind == "gaussian":
        return GaussianTailProblem(pcfg["threshold"], pcfg["sigma"])
    if kind == "quadratic":
        return QuadraticProblem(pcfg["center"], pcfg["noise_sd"])
    sim = 1 if kind == "logistic-sim1" else 2
    return LogisticIMProblem.simulated(sim, rng, contour_N=pcfg["contour_N"],
                                       assertion_coord=pcfg["assertion_coord"])


# --------------------------------------------------------------------------
# budgets


def draws_per_sample(cfg: dict) -> int:
    p = cfg["problem"]
    if p["type"].startswith("logistic"):
        n = _DESIGN_SHAPE[p["type"]][0]
        # Grid points average single-dataset indicators.
        return n if cfg["method"]["rule"] == "grid" else p["contour_N"] * n
    return 1


def budget_report(config) -> int:
    """Closed-form Monte Carlo draws per replication for the configured method.

    Evaluation of the reported estimates is not counted.
    """
    cfg = load_config(config)
    m = cfg["method"]
    dps = draws_per_sample(cfg)
    if m["rule"] == "grid":
        g = m["grid"]
        return GridSpec(g["bounds"], g["points_per_dim"], g["samples_per_point"]).budget(dps)
    q = problem_dim(cfg)
    uses_fd = m["rule"] == "kw" or m["estimator"] == "fd"
    per_iter = 2 * q * m["batch_M"] if uses_fd else m["batch_M"]
    return per_iter * m["iterations"] * dps


def budget_parity(config_a, config_b, tol: float = 0.02) -> bool:
    a, b = budget_report(config_a), budget_report(config_b)
    return abs(a - b) / a < tol


# --------------------------------------------------------------------------
# results


@dataclass
class RunSummary:
    """Per-replication records plus aggregates over the successful ones."""

    records: list
    columns: list
    config: dict = field(default_factory=dict)

    _TEXT = ("method", "status")
    _INT = ("replication", "samples_used")

    def ok_records(self) -> list:
        return [r for r in self.records if r["status"] == "ok"]

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.ok_records()], dtype=float)

    @property
    def numeric_columns(self) -> list:
        return [c for c in self.columns if c not in self._TEXT and c != "replication"]

    def aggregate(self) -> dict:
        """``{column: {"mean", "sd", "median"}}``; sd is the population standard deviation."""
        out = {}
        for c in self.numeric_columns:
            x = self.column(c)
            if x.size == 0:
                out[c] = {"mean": math.nan, "sd": math.nan, "median": math.nan}
            else:
                out[c] = {"mean": float(np.mean(x)), "sd": float(np.std(x)),
                          "median": float(np.median(x))}
        return out

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for rec in self.records:
                w.writerow([_fmt(rec[c]) for c in self.columns])

    @classmethod
    def from_csv(cls, path) -> "RunSummary":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        columns, records = rows[0], []
        for row in rows[1:]:
            rec = {}
            for c, v in zip(columns, row):
                if c in cls._TEXT:
                    rec[c] = v
                elif c in cls._INT:
                    rec[c] = int(v)
                else:
                    rec[c] = float(v)
            records.append(rec)
        return cls(records, columns)

    def write_aggregate_csv(self, path) -> None:
        agg = self.aggregate()
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["column", "mean", "sd", "median"])
            for c, stats in agg.items():
                w.writerow([c, _fmt(stats["mean"]), _fmt(stats["sd"]), _fmt(stats["median"])])


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _vec_cols(prefix: str, q: int) -> list:
    return [f"{prefix}_{i + 1}" for i in range(q)]


def record_columns(cfg: dict) -> list:
    q = problem_dim(cfg)
    cols = ["replication", "method", "status"]
    if cfg["method"]["rule"] == "grid":
        cols += _vec_cols("theta_best", q) + ["value_best", "value_grid_raw"]
    else:
        cols += (_vec_cols("theta_final", q) + _vec_cols("theta_avg", q)
                 + _vec_cols("theta_win", q) + ["value_final", "value_avg", "value_win"])
    if cfg["problem"]["type"].startswith("logistic"):
        cols += _vec_cols("theta_ref", q) + ["value_ref", "mle_failure_rate"]
    cols.append("samples_used")
    return cols


def _evaluate(problem, theta, cfg: dict, rng) -> float:
    """Value of the original (un-negated) objective at ``theta``."""
    if getattr(problem, "has_oracle", False):
        return float(problem.mean(np.asarray(theta)[None, :])[0])
    if isinstance(problem, LogisticIMProblem):
        return contour_estimate(problem, theta, cfg["problem"]["eval_N"], rng)
    return float(problem.estimate(np.asarray(theta)[None, :], rng, cfg["problem"]["eval_N"])[0])


def _put(rec: dict, prefix: str, vec) -> None:
    for i, v in enumerate(np.asarray(vec, dtype=float).reshape(-1)):
        rec[f"{prefix}_{i + 1}"] = float(v)


def run_replication(cfg: dict, r: int):
    """Execute replication ``r``; returns ``(record, trajectory_rows)``.

    Library errors (diverged iterates or estimators) mark the record as
    aborted instead of propagating.
    """
    cols = record_columns(cfg)
    rec = {c: math.nan for c in cols}
    rec.update(replication=r, method=cfg["method"]["rule"], status="ok", samples_used=0)
    rows = []
    data_rng, opt_rng, eval_rng = derive_streams(cfg["base_seed"], r)
    m = cfg["method"]
    try:
        problem = build_problem(cfg["problem"], data_rng)
        logistic = isinstance(problem, LogisticIMProblem)
        ref = None
        if logistic:
            ref = problem.constrained_mle().theta_hat
            _put(rec, "theta_ref", ref)
            rec["value_ref"] = _evaluate(problem, ref, cfg, eval_rng)

        if m["rule"] == "grid":
            g = m["grid"]
            target = problem.with_contour_N(1) if logistic else problem
            res = grid_search(target, GridSpec(g["bounds"], g["points_per_dim"],
                                               g["samples_per_point"]),
                              m["objective"], opt_rng)
            _put(rec, "theta_best", res.theta_best)
            rec["value_grid_raw"] = res.value_best
            rec["value_best"] = _evaluate(problem, res.theta_best, cfg, eval_rng)
            rec["samples_used"] = res.draws
            if logistic:
                stats = target.stats
                rec["mle_failure_rate"] = stats.failure_rate
        else:
            theta0 = m["theta0"]
            if theta0 == "constrained_mle":
                theta0 = ref
            elif theta0 == "mle":
                theta0 = problem.obs_mle.theta_hat
            elif theta0 == "truth":
                theta0 = problem.theta_star
            box = _box(m["box"]) if m["box"] is not None else None
            if logistic and box is None:
                lower = np.full(problem.dim, -np.inf)
                lower[problem.assertion_coord] = 0.0
                box = BoxConstraint(lower, np.full(problem.dim, np.inf))
            target = Negated(problem) if m["objective"] == "max" else problem
            fd = FdConfig(m["c0"], m["gamma"], m["batch_M"], Coupling(m["coupling"]))
            traj = run(target, theta0, m["rule"], StepSchedule(m["epsilon0"], m["tau"], m["schedule"]),
                       iterations=m["iterations"], rng=opt_rng, box=box,
                       batch_size=m["batch_M"], clip_bound=m["clip"], window=m["window"],
                       fd=fd, estimator=m["estimator"], rho=m["rho"], eta=m["eta"])
            _put(rec, "theta_final", traj.final)
            _put(rec, "theta_avg", traj.running_mean)
            _put(rec, "theta_win", traj.window_mean)
            rec["value_final"] = _evaluate(problem, traj.final, cfg, eval_rng)
            rec["value_avg"] = _evaluate(problem, traj.running_mean, cfg, eval_rng)
            rec["value_win"] = _evaluate(problem, traj.window_mean, cfg, eval_rng)
            rec["samples_used"] = traj.samples_used
            if logistic:
                rec["mle_failure_rate"] = problem.stats.failure_rate
            if cfg["write_trajectories"]:
                rows = _trajectory_rows(r, traj, cfg["trajectory_every"])
    except (LowerExpError, FloatingPointError) as exc:
        rec["status"] = f"aborted: {exc}"
        log.warning("replication %d aborted: %s", r, exc)
    return rec, rows


def _trajectory_rows(r: int, traj, every: int) -> list:
    its, means = traj.iterates, traj.running_means
    T = len(traj)
    keep = [t for t in range(T) if (t + 1) % every == 0 or t == T - 1]
    return [[r, t + 1, *its[t].tolist(), *means[t].tolist(), traj.step_sizes[t],
             traj.samples_cum[t]] for t in keep]


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _run_one(args):
    cfg, r = args
    return run_replication(cfg, r)


def run_experiment(config, *, seed: int | None = None, replications: int | None = None,
                   out_dir=None, workers: int | None = None) -> RunSummary:
    """Run all replications of an experiment and optionally write its outputs.

    Keyword arguments override the corresponding config fields.  Output
    files (when an output directory is set): ``summary.csv`` with one row per
    replication, ``aggregate.csv``, ``trajectories.csv`` for iterative
    methods, and ``manifest.json``.
    """
    cfg = load_config(config)
    if seed is not None:
        cfg["base_seed"] = int(seed)
    if replications is not None:
        cfg["replications"] = int(replications)
    if out_dir is not None:
        cfg["output"] = str(out_dir)
    if workers is not None:
        cfg["workers"] = int(workers)

    tasks = [(cfg, r) for r in range(cfg["replications"])]
    if cfg["workers"] > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]

    summary = RunSummary([rec for rec, _ in results], record_columns(cfg), cfg)
    if cfg["output"]:
        _write_outputs(cfg, summary, [rows for _, rows in results])
    return summary


def _write_outputs(cfg: dict, summary: RunSummary, traj_rows: list) -> None:
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    files = ["summary.csv", "aggregate.csv"]
    summary.to_csv(out / "summary.csv")
    summary.write_aggregate_csv(out / "aggregate.csv")
    if cfg["method"]["rule"] != "grid" and cfg["write_trajectories"]:
        q = problem_dim(cfg)
        with (out / "trajectories.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "t", *_vec_cols("theta", q), *_vec_cols("theta_bar", q),
                        "eps_t", "samples_cum"])
            for rows in traj_rows:
                for row in rows:
                    w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
        files.append("trajectories.csv")
    # Output location and worker count do not affect results, so reruns into
    # another directory or with another pool size produce identical manifests.
    recorded = {k: v for k, v in cfg.items() if k not in ("output", "workers")}
    manifest = {
        "config": recorded,
        "config_sha256": _config_hash(recorded),
        "base_seed": cfg["base_seed"],
        "replications": cfg["replications"],
        "budget_per_replication": budget_report(cfg),
        "library_version": __version__,
        "numpy_version": np.__version__,
        "files": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
