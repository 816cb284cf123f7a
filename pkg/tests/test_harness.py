"""Configuration, experiment orchestration, CSV/SVG emission, CLI."""
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kgflow.cli import main
from kgflow.config import (
    ConfigError,
    ExperimentConfig,
    from_metadata,
    load_config,
    to_metadata,
)
from kgflow.experiments import (
    augment_check,
    read_metadata_line,
    replay,
    run_flow_experiment,
    run_flow_trials,
    run_rf_experiment,
    stepsize_report,
    write_curves_csv,
)


def tiny_flow_config(tmp_path, **overrides) -> ExperimentConfig:
    cfg = ExperimentConfig(
        d=10,
        n_exponent=math.log(5) / math.log(10),  # n = 5
        activation="relu",
        K=12,
        target="ridge_hermite:0.5,1.0",
        trials=1,
        test_set_size=50,
        t_min_exponent=0.1,
        t_max_exponent=1.0,
        points_per_decade=2,
        seed=0,
        output=str(tmp_path / "out" / "tiny"),
    )
    for key, val in overrides.items():
        setattr(cfg, key, val)
    cfg.validate()
    return cfg


class TestConfig:
    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "# comment line\n"
            "d = 12\n"
            "trials = 3\n"
            "activation = relu+0.1he3  # inline comment\n"
            "cyclic = true\n"
        )
        cfg = load_config(str(path), ["trials=5", "seed=9"])
        assert (cfg.d, cfg.trials, cfg.seed) == (12, 5, 9)
        assert cfg.cyclic is True
        assert cfg.activation == "relu+0.1he3"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("dd = 12\n")
        with pytest.raises(ConfigError, match="unknown configuration key"):
            load_config(str(path))

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="bad value"):
            load_config(None, ["d=twelve"])

    def test_validation(self):
        with pytest.raises(ConfigError):
            load_config(None, ["d=2"])
        with pytest.raises(ConfigError):
            load_config(None, ["trials=0"])

    def test_n_from_exponent(self):
        cfg = ExperimentConfig(d=100, n_exponent=1.5)
        assert cfg.n == 1000

    def test_time_grid_bounds(self):
        cfg = ExperimentConfig(d=100, n_exponent=1.5, t_min_exponent=0.1,
                               points_per_decade=12)
        grid = cfg.time_grid()
        assert grid[0] == pytest.approx(100**0.1)
        assert grid[-1] == pytest.approx(100**2.2)  # s = 1 -> s + 1.2
        decades = math.log10(grid[-1] / grid[0])
        assert len(grid) == int(round(decades * 12)) + 1

    def test_metadata_round_trip(self):
        cfg = ExperimentConfig(d=37, n_exponent=1.25, cyclic=True, seed=5)
        line = to_metadata(cfg, "flow", "2026-01-01T00:00:00")
        back, kind = from_metadata(line)
        assert kind == "flow"
        # NaN sentinel in t_max_exponent defeats ==; compare the echo instead
        assert to_metadata(back, "flow", "x") == to_metadata(cfg, "flow", "x")


class TestFlowExperiment:
    def test_shapes_and_files(self, tmp_path):
        cfg = tiny_flow_config(tmp_path)
        curves = run_flow_experiment(cfg)
        n_rows = len(curves.times)
        assert n_rows >= 2
        csv_path = cfg.output + ".csv"
        with open(csv_path) as fh:
            lines = fh.read().strip().split("\n")
        assert lines[0].startswith("# kind=flow")
        assert lines[1] == "t,train_mean,train_std,test_mean,test_std,oracle,plateau_pred"
        assert len(lines) == 2 + n_rows
        assert len(lines[2].split(",")) == 7
        for suffix in (".svg", "_zoom.svg"):
            ET.parse(cfg.output + suffix)  # valid XML

    def test_null_target_all_zero(self, tmp_path):
        cfg = tiny_flow_config(tmp_path, target="ridge_hermite:0.0")
        curves = run_flow_trials(cfg)
        assert_allclose(curves.train, 0.0, atol=1e-25)
        assert_allclose(curves.test, 0.0, atol=1e-25)
        assert_allclose(curves.oracle, 0.0, atol=1e-25)

    def test_std_absent_for_single_trial(self, tmp_path):
        cfg = tiny_flow_config(tmp_path)
        curves = run_flow_trials(cfg)
        assert curves.train_std is None
        path = str(tmp_path / "single.csv")
        write_curves_csv(path, cfg, curves)
        with open(path) as fh:
            fh.readline()
            fh.readline()
            row = fh.readline().strip().split(",")
        assert row[2] == "" and row[4] == ""

    def test_rerun_byte_identical(self, tmp_path):
        cfg1 = tiny_flow_config(tmp_path, trials=2, output=str(tmp_path / "a"))
        cfg2 = tiny_flow_config(tmp_path, trials=2, output=str(tmp_path / "b"))
        run_flow_experiment(cfg1)
        run_flow_experiment(cfg2)

        def strip_ts(path):
            with open(path) as fh:
                lines = fh.read().split("\n")
            lines[0] = " ".join(
                p for p in lines[0].split() if not p.startswith("timestamp=")
            )
            return "\n".join(lines)

        a = strip_ts(str(tmp_path / "a.csv")).replace(str(tmp_path / "a"), "OUT")
        b = strip_ts(str(tmp_path / "b.csv")).replace(str(tmp_path / "b"), "OUT")
        assert a == b

    def test_replay_reproduces(self, tmp_path):
        cfg = tiny_flow_config(tmp_path, trials=2)
        run_flow_experiment(cfg)
        csv_path = cfg.output + ".csv"
        with open(csv_path) as fh:
            original = fh.read()
        out = replay(csv_path)
        with open(out) as fh:
            replayed = fh.read()

        def data_rows(text):
            return text.strip().split("\n")[1:]

        assert data_rows(original) == data_rows(replayed)

    def test_trial_failure_annotated(self, tmp_path, monkeypatch):
        import kgflow.experiments as exp

        def boom(*args, **kwargs):
            raise FloatingPointError("synthetic per-trial failure")

        monkeypatch.setattr(exp, "_trial_curves", boom)
        cfg = tiny_flow_config(tmp_path)
        with pytest.raises(RuntimeError, match="trial 0"):
            run_flow_trials(cfg)

    def test_cyclic_flow_runs(self, tmp_path):
        cfg = tiny_flow_config(
            tmp_path, cyclic=True, target="cyclic_cubic", trials=2
        )
        curves = run_flow_trials(cfg)
        assert curves.metadata["alpha"] == 1
        assert np.all(np.isfinite(curves.test))


class TestRFExperiment:
    def test_end_to_end_files(self, tmp_path):
        cfg = tiny_flow_config(tmp_path, output=str(tmp_path / "rf"))
        cfg.rf_features = 64
        cfg.rf_steps = 30
        cfg.rf_eval_points = 5
        cfg.rf_batch_size = 5
        res = run_rf_experiment(cfg)
        with open(cfg.output + ".csv") as fh:
            lines = fh.read().strip().split("\n")
        assert lines[0].startswith("# kind=rf-sgd")
        header = lines[1].split(",")
        assert header[:7] == [
            "t", "train_mean", "train_std", "test_mean", "test_std", "oracle",
            "plateau_pred",
        ]
        assert "iteration" in header
        assert len(lines) == 2 + len(res.t_eff)
        ET.parse(cfg.output + ".svg")

    def test_eval_rows_match_grid(self, tmp_path):
        cfg = tiny_flow_config(tmp_path, output=str(tmp_path / "rf2"))
        cfg.rf_features = 32
        cfg.rf_steps = 20
        cfg.rf_eval_points = 4
        cfg.rf_batch_size = 5
        res = run_rf_experiment(cfg)
        assert res.iterations[0] == 0
        assert res.iterations[-1] == 20


class TestAugmentCheck:
    def test_equivalence_small(self):
        report = augment_check(5, 4, "relu", np.logspace(-1, 2, 6), seed=0, K=20)
        assert report.max_discrepancy <= 1e-8

    def test_single_point_dataset(self):
        report = augment_check(5, 1, "relu", np.logspace(-1, 1, 4), seed=1, K=15)
        assert report.max_discrepancy <= 1e-10

    def test_zero_time_is_exact_zero(self):
        report = augment_check(5, 3, "relu", np.array([1e-300]), seed=2, K=15)
        assert report.max_discrepancy <= 1e-15

    def test_cap_enforced(self):
        with pytest.raises(ConfigError, match="cap"):
            augment_check(50, 100, "relu")


class TestStepsizeReport:
    def test_report_bands(self):
        rep = stepsize_report("relu", 6, 5, seed=0, K=20)
        assert rep.lambda_max_augmented is not None
        assert 0.5 * 6 <= rep.aug_ratio <= 1.5 * 6
        assert rep.eta_dot == pytest.approx(0.5 / rep.lambda_max_dot)
        assert 1 / 3 <= rep.lambda_max_cyclic / rep.lambda_max_dot <= 3

    def test_n_cap(self):
        with pytest.raises(ConfigError):
            stepsize_report("relu", 10, 6000)


class TestCLI:
    def test_spectrum_stdout(self, capsys):
        assert main(["spectrum", "--activation", "relu", "--d", "10", "--K", "5"]) == 0
        out = capsys.readouterr().out
        assert "xi_k" in out
        assert len(out.strip().split("\n")) == 3 + 6

    def test_flow_command(self, tmp_path, capsys):
        out = str(tmp_path / "cli_flow")
        rc = main([
            "flow",
            "--set", "d=10",
            "--set", f"n_exponent={math.log(5)/math.log(10)}",
            "--set", "trials=1",
            "--set", "test_set_size=20",
            "--set", "t_max_exponent=0.8",
            "--set", "points_per_decade=2",
            "--set", "K=10",
            "--set", f"output={out}",
        ])
        assert rc == 0
        assert (tmp_path / "cli_flow.csv").exists()

    def test_replay_command(self, tmp_path, capsys):
        out = str(tmp_path / "cli_replay")
        main([
            "flow",
            "--set", "d=10",
            "--set", f"n_exponent={math.log(4)/math.log(10)}",
            "--set", "trials=1",
            "--set", "test_set_size=10",
            "--set", "t_max_exponent=0.5",
            "--set", "points_per_decade=2",
            "--set", "K=8",
            "--set", f"output={out}",
        ])
        assert main(["replay", out + ".csv"]) == 0

    def test_augment_check_command(self, capsys):
        rc = main(["augment-check", "--d", "5", "--n", "3", "--times", "4"])
        assert rc == 0
        assert "max discrepancy" in capsys.readouterr().out

    def test_stepsize_command(self, capsys):
        rc = main(["stepsize", "--d", "6", "--n", "4"])
        assert rc == 0
        assert "recommended eta" in capsys.readouterr().out

    def test_config_error_exit_code(self, capsys):
        assert main(["flow", "--set", "d=1"]) == 2

    def test_numerical_error_exit_code(self, tmp_path, capsys):
        rc = main([
            "rf-sgd",
            "--set", "d=10",
            "--set", f"n_exponent={math.log(6)/math.log(10)}",
            "--set", "trials=1",
            "--set", "test_set_size=10",
            "--set", "rf_features=16",
            "--set", "rf_steps=200",
            "--set", "rf_learning_rate=1e7",
            "--set", "rf_batch_size=6",
            "--set", "K=8",
            "--set", f"output={tmp_path / 'diverge'}",
        ])
        assert rc == 3

    def test_bad_replay_exit_code(self, tmp_path):
        p = tmp_path / "junk.csv"
        p.write_text("not a metadata line\n")
        assert main(["replay", str(p)]) == 2


class TestMetadataReading:
    def test_read_metadata_line(self, tmp_path):
        cfg = tiny_flow_config(tmp_path, trials=1)
        run_flow_experiment(cfg)
        back, kind = read_metadata_line(cfg.output + ".csv")
        assert kind == "flow"
        assert back.d == cfg.d
        assert back.output == cfg.output
