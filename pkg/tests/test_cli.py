"""Tests for the command line interface (tiny configs for speed)."""

import csv
import json

import pytest

from dunal.cli import main
from dunal.harness import AcquisitionSettings, ExperimentConfig, ModelConfig, TrainSettings


def write_tiny_config(path, method="dun", n_repeats=1):
    cfg = ExperimentConfig(
        dataset="wiggle",
        n_repeats=n_repeats,
        n_init=5,
        n_queries=2,
        query_size=3,
        model=ModelConfig(method=method, depth=2, hidden_dim=8, mc_eval_samples=3),
        train=TrainSettings(iterations=12, eval_every=6, mc_train_samples=2),
        acquisition=AcquisitionSettings(),
    )
    path.write_text(cfg.to_json())
    return path


class TestParsing:
    def test_no_command_is_usage_error(self):
        assert main([]) == 2

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "usage" in capsys.readouterr().out

    def test_missing_required_args(self):
        assert main(["run"]) == 2

    def test_unknown_command(self):
        assert main(["teleport"]) == 2


class TestRunCommand:
    def test_run_persists(self, tmp_path, capsys):
        cfg_path = write_tiny_config(tmp_path / "cfg.json")
        out = tmp_path / "exp"
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert (out / "runs.csv").exists()
        assert (out / "config.json").exists()
        assert "runs.csv" in capsys.readouterr().out

    def test_run_refuses_dirty_dir_then_force(self, tmp_path):
        cfg_path = write_tiny_config(tmp_path / "cfg.json")
        out = tmp_path / "exp"
        out.mkdir()
        (out / "old.txt").write_text("x")
        assert main(["run", "--config", str(cfg_path), "--out", str(out), "--quiet"]) == 2
        assert (
            main(["run", "--config", str(cfg_path), "--out", str(out), "--quiet", "--force"])
            == 0
        )

    def test_repeats_override(self, tmp_path):
        cfg_path = write_tiny_config(tmp_path / "cfg.json")
        out = tmp_path / "exp"
        assert (
            main(
                [
                    "run",
                    "--config",
                    str(cfg_path),
                    "--out",
                    str(out),
                    "--repeats",
                    "2",
                    "--quiet",
                ]
            )
            == 0
        )
        with open(out / "runs.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 2 * 3

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "no.json"), "--out", str(tmp_path / "o")]) == 2

    def test_invalid_config_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{]")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_bad_data_file_is_operational_error(self, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("1,2\n3,oops\n")
        cfg = json.loads(write_tiny_config(tmp_path / "cfg.json").read_text())
        cfg["dataset"] = "concrete"
        cfg["data_path"] = str(data)
        cfg_path = tmp_path / "cfg2.json"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 1

    def test_out_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DUNAL_OUT_ROOT", str(tmp_path / "root"))
        cfg_path = write_tiny_config(tmp_path / "cfg.json")
        assert main(["run", "--config", str(cfg_path), "--out", "exp", "--quiet"]) == 0
        assert (tmp_path / "root" / "exp" / "runs.csv").exists()


class TestSweepCommand:
    def test_temperature_sweep(self, tmp_path):
        cfg_path = write_tiny_config(tmp_path / "cfg.json")
        out = tmp_path / "sweep"
        code = main(
            [
                "sweep",
                "--config",
                str(cfg_path),
                "--axis",
                "temperature",
                "--values",
                "1,10",
                "--out",
                str(out),
                "--quiet",
            ]
        )
        assert code == 0
        assert (out / "temperature=1.0" / "runs.csv").exists()
        assert (out / "temperature=10.0" / "runs.csv").exists()
        with open(out / "sweep_summary.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["axis", "value", "n_runs", "final_test_nll_mean"]
        assert len(rows) == 3

    def test_bad_axis_rejected_by_parser(self, tmp_path):
        cfg_path = write_tiny_config(tmp_path / "cfg.json")
        assert (
            main(
                [
                    "sweep",
                    "--config",
                    str(cfg_path),
                    "--axis",
                    "learning_rate",
                    "--values",
                    "1",
                    "--out",
                    str(tmp_path / "o"),
                ]
            )
            == 2
        )


class TestPosteriorCommand:
    def test_prints_and_writes(self, tmp_path, capsys):
        out = tmp_path / "depths.csv"
        code = main(
            [
                "posterior",
                "--dataset",
                "wiggle",
                "--sizes",
                "5,20",
                "--n-seeds",
                "2",
                "--depth",
                "2",
                "--hidden-dim",
                "8",
                "--iterations",
                "15",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert "posterior mean depth" in capsys.readouterr().out
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["dataset", "size", "seed", "mean_depth"]
        assert len(rows) == 1 + 2 * 2

    def test_unknown_dataset(self):
        assert main(["posterior", "--dataset", "nope", "--sizes", "5"]) == 2


class TestBiasCommand:
    def test_summarizes_runs(self, tmp_path, capsys):
        cfg_path = write_tiny_config(tmp_path / "cfg.json")
        out = tmp_path / "exp"
        assert main(["run", "--config", str(cfg_path), "--out", str(out), "--quiet"]) == 0
        capsys.readouterr()
        assert main(["bias", "--runs", str(out / "runs.csv")]) == 0
        text = capsys.readouterr().out
        assert "bias_nll" in text and "round" in text

    def test_missing_file(self, tmp_path):
        assert main(["bias", "--runs", str(tmp_path / "none.csv")]) == 2

    def test_missing_columns(self, tmp_path):
        p = tmp_path / "runs.csv"
        p.write_text("a,b\n1,2\n")
        assert main(["bias", "--runs", str(p)]) == 2


class TestGenToyCommand:
    def test_round_trips_through_loader(self, tmp_path):
        from dunal.data import load_delimited

        out = tmp_path / "wiggle.csv"
        assert main(["gen-toy", "--name", "wiggle", "--out", str(out), "--n", "40"]) == 0
        ds = load_delimited(out)
        assert len(ds) == 40
        assert ds.input_dim == 1

    def test_unknown_name_rejected(self, tmp_path):
        assert main(["gen-toy", "--name", "spiral", "--out", str(tmp_path / "x.csv")]) == 2


class TestCheckGradientsCommand:
    def test_passes_on_small_suite(self, capsys):
        assert main(["check-gradients", "--n-nets", "2"]) == 0
        assert "PASS" in capsys.readouterr().out
