"""Command line behavior: exit codes and output files."""

import pytest

from dunal_plots.cli import main

from conftest import write_aggregate


class TestCurvesCommand:
    def test_success(self, aggregate_csv, tmp_path, capsys):
        out = tmp_path / "curves.png"
        code = main(["curves", str(aggregate_csv), "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert str(out) in capsys.readouterr().out

    def test_multiple_files_and_metric(self, tmp_path):
        a = write_aggregate(tmp_path / "a.csv", method="dun")
        b = write_aggregate(tmp_path / "b.csv", method="mcdo")
        out = tmp_path / "bias.pdf"
        code = main(["curves", str(a), str(b), "--metric", "bias", "--out", str(out)])
        assert code == 0
        assert out.exists()

    def test_schema_violation_exits_1(self, posterior_csv, tmp_path, capsys):
        code = main(["curves", str(posterior_csv), "--out", str(tmp_path / "o.png")])
        assert code == 1
        assert "missing columns" in capsys.readouterr().err

    def test_missing_file_exits_1(self, tmp_path, capsys):
        code = main(
            ["curves", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "o.png")]
        )
        assert code == 1
        assert "file not found" in capsys.readouterr().err

    def test_unknown_metric_is_usage_error(self, aggregate_csv, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(
                [
                    "curves",
                    str(aggregate_csv),
                    "--metric",
                    "accuracy",
                    "--out",
                    str(tmp_path / "o.png"),
                ]
            )
        assert excinfo.value.code == 2


class TestPosteriorCommand:
    def test_success(self, posterior_csv, tmp_path):
        out = tmp_path / "posterior.png"
        code = main(["posterior", str(posterior_csv), "--out", str(out)])
        assert code == 0
        assert out.exists()

    def test_rounds_override(self, posterior_csv, tmp_path):
        out = tmp_path / "posterior.png"
        code = main(
            ["posterior", str(posterior_csv), "--out", str(out), "--rounds", "0", "15"]
        )
        assert code == 0

    def test_bad_round_exits_1(self, posterior_csv, tmp_path, capsys):
        code = main(
            [
                "posterior",
                str(posterior_csv),
                "--out",
                str(tmp_path / "o.png"),
                "--rounds",
                "0",
                "3",
            ]
        )
        assert code == 1
        assert "not present" in capsys.readouterr().err


class TestUsage:
    def test_no_command_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_missing_out_exits_2(self, aggregate_csv):
        with pytest.raises(SystemExit) as excinfo:
            main(["curves", str(aggregate_csv)])
        assert excinfo.value.code == 2
