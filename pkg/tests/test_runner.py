import csv
import json

import numpy as np
import pytest

from lowerexp.cli import main
from lowerexp.exceptions import ConfigError
from lowerexp.presets import PRESETS, get_preset
from lowerexp.runner import (
    RunSummary,
    budget_parity,
    budget_report,
    derive_streams,
    load_config,
    run_experiment,
    run_replication,
    validate_config,
)


def small_gauss(**method):
    cfg = get_preset("gaussian-rm")
    cfg["method"].update(iterations=50, **method)
    cfg["replications"] = 4
    return cfg


class TestConfig:
    def test_all_presets_validate(self):
        for name in PRESETS:
            cfg = load_config(name)
            assert cfg["name"] == name

    def test_defaults_filled(self):
        cfg = validate_config({"problem": {"type": "gaussian"},
                               "method": {"rule": "rm", "theta0": [6.0]}})
        assert cfg["method"]["tau"] == 0.5 and cfg["problem"]["sigma"] == 2.0
        assert cfg["method"]["objective"] == "min" and cfg["base_seed"] == 0

    def test_idempotent(self):
        cfg = load_config("sim1-kw-n16")
        assert validate_config(cfg) == cfg

    def test_logistic_defaults(self):
        cfg = validate_config({"problem": {"type": "logistic-sim1"},
                               "method": {"rule": "rm", "theta0": "mle"}})
        assert cfg["method"]["objective"] == "max" and cfg["method"]["estimator"] == "fd"

    @pytest.mark.parametrize("mutate, field", [
        (lambda c: c["method"].update(epsilon0=-1.0), "method.epsilon0"),
        (lambda c: c["method"].update(tau=1.5), "method.tau"),
        (lambda c: c["method"].update(theta0=[1.0, 2.0]), "method.theta0"),
        (lambda c: c["method"].update(theta0="mle"), "method.theta0"),
        (lambda c: c["method"].update(coupling="antithetic"), "method.coupling"),
        (lambda c: c.update(replications=0), "replications"),
        (lambda c: c["method"].update(box={"lower": [1.0], "upper": [0.0]}), "method.box"),
        (lambda c: c["problem"].update(sigma=0), "problem.sigma"),
        (lambda c: c.update(bogus=1), "<root>"),
    ])
    def test_errors_name_field(self, mutate, field):
        cfg = get_preset("gaussian-rm")
        mutate(cfg)
        with pytest.raises(ConfigError) as err:
            validate_config(cfg)
        assert err.value.field == field and field in str(err.value)

    def test_grid_dimension_checked(self):
        cfg = get_preset("sim1-grid")
        cfg["method"]["grid"]["points_per_dim"] = [2, 2]
        with pytest.raises(ConfigError, match="method.grid"):
            validate_config(cfg)

    def test_unknown_source(self):
        with pytest.raises(ConfigError):
            load_config("no-such-preset")

    def test_json_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(small_gauss()))
        assert load_config(str(p))["method"]["iterations"] == 50
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(str(p))


class TestBudget:
    @pytest.mark.parametrize("name, expected", [
        ("sim1-kw-n16", 7_680_000), ("sim1-kw-n40", 7_680_000), ("sim1-grid", 7_776_000),
        ("sim2-kw-n16", 12_960_000), ("sim2-kw-n40", 12_960_000), ("sim2-grid", 12_960_000),
        ("gaussian-rm", 1000), ("gaussian-rm-batched", 1000), ("gaussian-grid", 1000),
    ])
    def test_presets(self, name, expected):
        assert budget_report(name) == expected

    def test_parity(self):
        assert budget_parity("sim1-kw-n16", "sim1-grid")
        assert budget_parity("sim2-kw-n40", "sim2-grid")
        assert budget_parity("gaussian-rm", "gaussian-grid")
        assert not budget_parity("gaussian-rm", "gaussian-newton")

    def test_matches_samples_used(self):
        cfg = get_preset("sim1-kw-n16")
        cfg["method"]["iterations"] = 3
        cfg["replications"] = 1
        rec, _ = run_replication(load_config(cfg), 0)
        assert rec["samples_used"] == budget_report(cfg) == 2 * 3 * 3 * 16 * 64


class TestSeeds:
    def test_streams_independent_and_stable(self):
        a = [g.random() for g in derive_streams(7, 3)]
        b = [g.random() for g in derive_streams(7, 3)]
        c = [g.random() for g in derive_streams(7, 4)]
        assert a == b and len(set(a)) == 3 and a != c

    def test_methods_share_datasets(self):
        kw = get_preset("sim1-kw-n16")
        kw["method"]["iterations"] = 2
        grid = get_preset("sim1-grid")
        grid["method"]["grid"].update(points_per_dim=[2, 2, 2], samples_per_point=1)
        for cfg in (kw, grid):
            cfg["replications"] = 2
        a = run_experiment(kw, seed=3)
        b = run_experiment(grid, seed=3)
        np.testing.assert_array_equal(a.column("value_ref"), b.column("value_ref"))
        np.testing.assert_array_equal(a.column("theta_ref_1"), b.column("theta_ref_1"))


class TestRunExperiment:
    def test_outputs_and_byte_identical_rerun(self, tmp_path):
        run_experiment(small_gauss(), seed=1, out_dir=tmp_path / "a")
        run_experiment(small_gauss(), seed=1, out_dir=tmp_path / "b")
        for f in ("summary.csv", "aggregate.csv", "trajectories.csv", "manifest.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert manifest["budget_per_replication"] == 50 and manifest["replications"] == 4
        header = next(csv.reader((tmp_path / "a" / "trajectories.csv").open()))
        assert header == ["replication", "t", "theta_1", "theta_bar_1", "eps_t", "samples_cum"]

    def test_workers_do_not_change_results(self, tmp_path):
        run_experiment(small_gauss(), seed=2, out_dir=tmp_path / "w1", workers=1)
        run_experiment(small_gauss(), seed=2, out_dir=tmp_path / "w2", workers=2)
        for f in ("summary.csv", "trajectories.csv"):
            assert (tmp_path / "w1" / f).read_bytes() == (tmp_path / "w2" / f).read_bytes()

    def test_csv_round_trip(self, tmp_path):
        s = run_experiment(small_gauss(), seed=3)
        s.to_csv(tmp_path / "s.csv")
        back = RunSummary.from_csv(tmp_path / "s.csv")
        assert back.columns == s.columns and back.records == s.records

    def test_aggregate_population_sd(self):
        s = run_experiment(small_gauss(), seed=4)
        x = s.column("theta_final_1")
        assert s.aggregate()["theta_final_1"]["sd"] == pytest.approx(np.std(x, ddof=0))

    def test_trajectory_thinning(self, tmp_path):
        cfg = small_gauss()
        cfg["trajectory_every"] = 20
        run_experiment(cfg, replications=1, out_dir=tmp_path)
        rows = list(csv.reader((tmp_path / "trajectories.csv").open()))[1:]
        assert [int(r[1]) for r in rows] == [20, 40, 50]

    def test_grid_record(self):
        cfg = get_preset("gaussian-grid")
        cfg["replications"] = 2
        s = run_experiment(cfg, seed=0)
        assert "value_best" in s.columns and s.column("samples_used").tolist() == [1000, 1000]

    def test_aborted_replication_recorded(self):
        cfg = small_gauss(box=None, epsilon0=1e308, schedule="constant")
        cfg["problem"] = {"type": "quadratic", "center": [0.0]}
        cfg["method"]["theta0"] = [1e308]
        s = run_experiment(cfg, replications=1)
        assert s.records[0]["status"].startswith("aborted")
        assert s.ok_records() == []


class TestCli:
    def test_presets_and_schema(self, capsys):
        assert main(["presets", "list"]) == 0
        assert "sim1-grid" in capsys.readouterr().out
        assert main(["presets", "show", "gaussian-rm"]) == 0
        assert json.loads(capsys.readouterr().out)["method"]["rule"] == "rm"
        assert main(["schema"]) == 0

    def test_budget(self, capsys):
        assert main(["budget", "--config", "sim2-grid"]) == 0
        assert capsys.readouterr().out.strip() == "12960000"

    def test_run(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(small_gauss()))
        assert main(["run", "--config", str(p), "--reps", "2", "--out", str(tmp_path / "o")]) == 0
        assert "value_avg" in capsys.readouterr().out
        assert (tmp_path / "o" / "summary.csv").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = small_gauss(tau=2.0)
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(p)]) == 1
        assert "method.tau" in capsys.readouterr().err
        assert main(["presets", "show", "nope"]) == 1
        assert main(["run", "--config", "gaussian-rm", "--reps", "0"]) == 1

    def test_all_aborted_exit_code(self, tmp_path):
        cfg = small_gauss(box=None, epsilon0=1e308, schedule="constant", theta0=[1e308])
        cfg["problem"] = {"type": "quadratic", "center": [0.0]}
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(p), "--reps", "1"]) == 2
