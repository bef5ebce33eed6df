#!/usr/bin/env python3
"""
Tests for the command line: run, validate, plotdata and health
"""

import csv
import sys
import os

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import runners.stability_runner
import utils
from config import settings
from main import EXIT_ERROR, EXIT_OK, EXIT_PREDICATE_FAILED, main
from models import Regime, RegimeReport, SampleRecord
from report_writer import SAMPLE_COLUMNS, samples_csv

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")


def small_regime_one(output_path, nu=-0.5):
    return f"""
[campaign]
regime = "I"
samples = 4
seed = 42
output_path = "{output_path}"
initial_state = "zero"

[parameters]
nu = {nu}
sigma = 0.0

[numerics]
n_modes = 8
dt = 0.01
slow_horizon = 1.0
"""


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def samples_file(tmp_path, records):
    report = RegimeReport(regime=Regime.I, records=records, summary=[], passed=True)
    return write(tmp_path / "input_samples.v1.csv", samples_csv(report))


def test_validate(tmp_path):
    assert main(["validate", os.path.join(CONFIG_DIR, "regime_I.toml")]) == EXIT_OK
    bad = write(tmp_path / "bad.toml", small_regime_one(tmp_path / "out", nu=0.5))
    assert main(["validate", bad]) == EXIT_ERROR
    assert main(["validate", str(tmp_path / "missing.toml")]) == EXIT_ERROR


def test_mis_gated_run_writes_nothing(tmp_path):
    config = write(tmp_path / "bad.toml", small_regime_one(tmp_path / "out", nu=0.5))
    assert main(["run", config]) == EXIT_ERROR
    assert not (tmp_path / "out_samples.v1.csv").exists()


def test_run_is_reproducible(tmp_path):
    config = write(tmp_path / "run.toml", small_regime_one(tmp_path / "out"))
    assert main(["run", config]) == EXIT_OK

    samples, summary = tmp_path / "out_samples.v1.csv", tmp_path / "out_summary.v1.csv"
    rows = read_rows(samples)
    assert rows[0][:len(SAMPLE_COLUMNS)] == SAMPLE_COLUMNS
    assert len(rows) == 5
    assert [int(row[0]) for row in rows[1:]] == [0, 1, 2, 3]
    assert all(abs(float(row[2]) + 0.5) < 1e-8 for row in rows[1:])
    assert read_rows(summary)[0] == ["metric", "value", "ci_low", "ci_high", "pass"]

    first = samples.read_bytes(), summary.read_bytes()
    assert main(["run", config]) == EXIT_OK
    assert (samples.read_bytes(), summary.read_bytes()) == first


def test_failed_predicate_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(runners.stability_runner, "LAMBDA_TOLERANCE", -1.0)
    config = write(tmp_path / "run.toml", small_regime_one(tmp_path / "out"))
    assert main(["run", config]) == EXIT_PREDICATE_FAILED
    summary = read_rows(tmp_path / "out_summary.v1.csv")
    assert ["all_lambda_leq_nu", "false"] == [summary[1][0], summary[1][4]]


def test_runner_error_exit_code(tmp_path):
    text = f"""
regime = "IV-critical"
samples = 2
seed = 1
output_path = "{tmp_path / 'iv'}"
nu = 0.0
sigma = 0.01
epsilon = 0.1
n_modes = 8
dt = 0.01
slow_horizon = 0.1
disable_nonlinearity = true
"""
    assert main(["run", write(tmp_path / "iv.toml", text)]) == EXIT_ERROR
    assert not (tmp_path / "iv_samples.v1.csv").exists()


def test_output_directory_override(tmp_path, monkeypatch):
    redirected = tmp_path / "redirected"
    monkeypatch.setattr(settings, "output_dir", str(redirected))
    config = write(tmp_path / "run.toml", small_regime_one(tmp_path / "out"))
    assert main(["run", config]) == EXIT_OK
    assert (redirected / "out_samples.v1.csv").exists()
    assert (redirected / "out_summary.v1.csv").exists()
    assert not (tmp_path / "out_samples.v1.csv").exists()


def test_lambda_histogram(tmp_path):
    records = [SampleRecord(sample_index=i, seed=1, lambda_=-1.0 + i / 50) for i in range(100)]
    out = tmp_path / "hist.csv"
    assert main(["plotdata", samples_file(tmp_path, records), "--kind", "lambda-histogram",
                 "--output", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert rows[0] == ["bin_low", "bin_high", "count"]
    assert len(rows) == 21
    assert sum(int(row[2]) for row in rows[1:]) == 100


def test_histogram_skips_excluded(tmp_path):
    records = [SampleRecord(sample_index=i, seed=1, attractor_value=i / 10, excluded=i < 5) for i in range(50)]
    out = tmp_path / "hist.csv"
    assert main(["plotdata", samples_file(tmp_path, records), "--kind", "attractor-histogram",
                 "--output", str(out)]) == EXIT_OK
    assert sum(int(row[2]) for row in read_rows(out)[1:]) == 45


def test_error_series(tmp_path):
    records = [SampleRecord(sample_index=i, seed=1, error_sup=eps ** 2 * (1 + i), epsilon=eps)
               for eps in (0.2, 0.1, 0.05) for i in range(3)]
    out = tmp_path / "series.csv"
    assert main(["plotdata", samples_file(tmp_path, records), "--kind", "error-series",
                 "--output", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert rows[0] == ["epsilon", "log_epsilon", "median_error_sup", "log_median_error_sup"]
    assert [float(row[0]) for row in rows[1:]] == [0.2, 0.1, 0.05]
    assert float(rows[1][2]) == pytest.approx(0.08)


def test_empty_input_gives_header_only(tmp_path):
    out = tmp_path / "hist.csv"
    assert main(["plotdata", samples_file(tmp_path, []), "--kind", "lambda-histogram",
                 "--output", str(out)]) == EXIT_OK
    assert read_rows(out) == [["bin_low", "bin_high", "count"]]


def test_unknown_plot_kind(tmp_path):
    assert main(["plotdata", samples_file(tmp_path, []), "--kind", "scatter"]) == EXIT_ERROR


def test_no_command():
    assert main([]) == EXIT_ERROR


def test_health_lists_regimes(capsys):
    assert main(["health"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "numpy" in out
    for regime in Regime:
        assert f"  {regime.value}: " in out


def test_health_flags_missing_dependency(monkeypatch):
    monkeypatch.setattr(utils, "check_dependencies",
                        lambda: {"numpy": True, "numba": True, "aiofiles": False})
    assert main(["health"]) == EXIT_ERROR
    monkeypatch.setattr(utils, "check_dependencies", lambda: {"numpy": True, "numba": False})
    assert main(["health"]) == EXIT_OK


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
