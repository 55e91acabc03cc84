import json
import sys

import numpy as np
import pytest
from typer.testing import CliRunner

from copula_wavelet import __version__
from copula_wavelet.cli import app, main

runner = CliRunner()


@pytest.fixture
def sample_csv(tmp_path):
    path = tmp_path / "sample.csv"
    result = runner.invoke(app, ["simulate", "--model", "fgm", "--theta", "0.75", "--n", "1000", "--seed", "7", "--out", str(path)])
    assert result.exit_code == 0, result.output
    return path


def test_version():
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_simulate_writes_rows(sample_csv):
    data = np.loadtxt(sample_csv, delimiter=",")
    assert data.shape == (1000, 2)
    assert np.all((data >= 0.0) & (data <= 1.0))


def test_simulate_rejects_bad_parameter(tmp_path):
    result = runner.invoke(app, ["simulate", "--model", "fgm", "--theta", "2", "--out", str(tmp_path / "x.csv")])
    assert result.exit_code == 1
    assert "Error" in result.output


def test_estimate_toy_sample(tmp_path):
    data = tmp_path / "toy.csv"
    data.write_text("0.1\n0.4\n0.2\n0.9\n")
    out = tmp_path / "density.csv"
    result = runner.invoke(app, ["estimate", str(data), "--dim", "1", "--level", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert out.read_text().splitlines() == ["u1,value", "0.25,0.5", "0.75,1.5"]


def test_estimate_auto_level_reports_choice(sample_csv, tmp_path):
    result = runner.invoke(app, ["estimate", str(sample_csv), "--auto-level", "1", "--out", str(tmp_path / "d.csv")])
    assert result.exit_code == 0, result.output
    assert "j=2" in result.output
    assert "h4 policy" in result.output


def test_estimate_is_rank_invariant(sample_csv, tmp_path):
    moved = tmp_path / "moved.csv"
    np.savetxt(moved, np.exp(np.loadtxt(sample_csv, delimiter=",")), delimiter=",", fmt="%.17g")
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for source, out in ((sample_csv, first), (moved, second)):
        result = runner.invoke(app, ["estimate", str(source), "--wavelet", "db2", "--level", "3", "--grid", "21", "--out", str(out)])
        assert result.exit_code == 0, result.output
    assert first.read_bytes() == second.read_bytes()


def test_estimate_truncate_gives_non_negative_values(sample_csv, tmp_path):
    out = tmp_path / "d.csv"
    args = ["estimate", str(sample_csv), "-w", "db3", "-j", "3", "-g", "21", "--truncate", "-o", str(out)]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    values = np.loadtxt(out, delimiter=",", skiprows=1)[:, -1]
    assert values.min() >= 0.0
    assert values.mean() == pytest.approx(1.0)


@pytest.mark.parametrize(
    "extra",
    [
        [],
        ["--level", "2", "--auto-level", "1"],
        ["--level", "14"],
        ["--level", "2", "--dim", "3"],
        ["--level", "2", "--wavelet", "sym4"],
        ["--level", "2", "--ties", "reject", "--rank-scaling", "n+2"],
    ],
)
def test_estimate_invalid_input(sample_csv, tmp_path, extra):
    result = runner.invoke(app, ["estimate", str(sample_csv), "--out", str(tmp_path / "d.csv"), *extra])
    assert result.exit_code == 1
    assert "Error" in result.output


def test_estimate_empty_file(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    result = runner.invoke(app, ["estimate", str(empty), "--level", "2", "--out", str(tmp_path / "d.csv")])
    assert result.exit_code == 1
    assert "empty" in result.output


def test_estimate_rejected_ties(tmp_path):
    data = tmp_path / "ties.csv"
    data.write_text("0.1,0.2\n0.1,0.5\n0.3,0.4\n")
    result = runner.invoke(app, ["estimate", str(data), "-j", "1", "--ties", "reject", "-o", str(tmp_path / "d.csv")])
    assert result.exit_code == 1


def test_estimate_help_lists_flags():
    result = runner.invoke(app, ["estimate", "--help"])
    assert result.exit_code == 0
    for flag in ("--wavelet", "--level", "--auto-level", "--rank-scaling", "--ties", "--truncate", "--out"):
        assert flag in result.output


def test_check_basis():
    result = runner.invoke(app, ["check-basis", "--wavelet", "haar"])
    assert result.exit_code == 0, result.output
    assert "pass" in result.output


def test_check_kernel():
    result = runner.invoke(app, ["check-kernel", "--wavelet", "db2", "--level", "3"])
    assert result.exit_code == 0, result.output


def test_experiment_bias(config_dir, tmp_path):
    result = runner.invoke(app, ["experiment", "bias", "--config", str(config_dir / "bias_fgm.toml"), "--out-dir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["criteria"][0]["passed"] is True
    assert (tmp_path / "report.csv").exists()
    assert (tmp_path / "curves.csv").exists()


def test_experiment_rejects_decreasing_sizes(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("n_list = [4096, 1024]\n")
    result = runner.invoke(app, ["experiment", "prop1", "--config", str(config)])
    assert result.exit_code == 1
    assert "increasing" in result.output


def test_experiment_refuses_unbounded_model(tmp_path):
    config = tmp_path / "clayton.toml"
    config.write_text(
        'n_list = [500, 1000]\nreplications = 2\n[model]\nkind = "clayton"\ntheta = 1.0\n'
        '[levels]\nkind = "explicit"\nlevels = [2, 2]\n'
    )
    result = runner.invoke(app, ["experiment", "decompose", "--config", str(config), "--out-dir", str(tmp_path / "out")])
    assert result.exit_code == 1
    assert "unbounded" in result.output


@pytest.mark.parametrize(
    "argv",
    [["copwave", "estimate", "--bogus"], ["copwave", "estimate"], ["copwave", "no-such-command"]],
    ids=["unknown-flag", "missing-argument", "unknown-command"],
)
def test_main_exits_one_on_usage_errors(monkeypatch, capsys, argv):
    monkeypatch.setattr(sys, "argv", argv)
    with pytest.raises(SystemExit) as excinfo:
        main()
    assert excinfo.value.code == 1
    assert "Traceback" not in capsys.readouterr().err


def test_main_exits_zero_on_success(monkeypatch):
    monkeypatch.setattr(sys, "argv", ["copwave", "check-basis", "--wavelet", "haar"])
    with pytest.raises(SystemExit) as excinfo:
        main()
    assert excinfo.value.code == 0
