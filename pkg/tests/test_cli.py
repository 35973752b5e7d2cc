import json
import os

import pytest

from nilmchaos import pipeline
from nilmchaos.cli import EXIT_DIVERGED, EXIT_INVALID, EXIT_OK, main

SMALL = """
[dataset]
n_samples = 150
n_train = 100
n_valid = 50

[regression]
epochs = 10
"""


@pytest.fixture
def config_file(tmp_path, monkeypatch):
    monkeypatch.delenv(pipeline.SEED_ENV, raising=False)
    path = tmp_path / "cfg.toml"
    path.write_text(SMALL)
    return path


def test_run_all_and_disaggregate(config_file, tmp_path, capsys):
    assert main(["run-all", "--config", str(config_file)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "E_valid" in out and "i_max" in out
    for name in ("dataset.csv", "model.json", "trace.csv", "report.json", "predictions.csv"):
        assert (tmp_path / name).exists()
    assert main(["disaggregate", "--config", str(config_file), "--quiet"]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert len((tmp_path / "states.csv").read_text().splitlines()) == 150 - 8 + 1 + 1


def test_separate_subcommands(config_file, tmp_path):
    args = ["--config", str(config_file), "--quiet"]
    assert main(["simulate"] + args) == EXIT_OK
    assert main(["train"] + args) == EXIT_OK
    assert main(["eval"] + args) == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["rows_valid"] == 50 - 8 + 1


def test_seed_flag_overrides_env(config_file, tmp_path, monkeypatch):
    monkeypatch.setenv(pipeline.SEED_ENV, "0.31")
    assert main(["simulate", "--config", str(config_file), "--quiet"]) == EXIT_OK
    env_run = (tmp_path / "dataset.csv").read_text()
    assert main(["simulate", "--config", str(config_file), "--quiet", "--seed", "0.31"]) == EXIT_OK
    assert (tmp_path / "dataset.csv").read_text() == env_run
    assert main(["simulate", "--config", str(config_file), "--quiet", "--seed", "0.42"]) == EXIT_OK
    assert (tmp_path / "dataset.csv").read_text() != env_run


def test_invalid_config_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[network]\nbogus = 1\n")
    assert main(["simulate", "--config", str(path)]) == EXIT_INVALID
    assert "bogus" in capsys.readouterr().err


def test_rejected_seed_exit_code(config_file):
    assert main(["simulate", "--config", str(config_file), "--seed", "0.75", "--quiet"]) == EXIT_INVALID


def test_missing_dataset_exit_code(config_file):
    assert main(["train", "--config", str(config_file), "--quiet"]) == EXIT_INVALID


def test_divergence_exit_code(config_file, capsys):
    config_file.write_text(SMALL.replace("epochs = 10", "epochs = 200\neta = 50.0"))
    assert main(["run-all", "--config", str(config_file), "--quiet"]) == EXIT_DIVERGED
    assert "diverged" in capsys.readouterr().err


def test_stiff_rk4_exit_code(config_file):
    config_file.write_text(SMALL + '\n[network]\nintegrator = "rk4"\n')
    assert main(["simulate", "--config", str(config_file), "--quiet"]) == EXIT_DIVERGED
