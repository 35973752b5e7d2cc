import csv
from dataclasses import replace
import json

import numpy as np
import pytest

from nilmchaos import pipeline
from nilmchaos.chaos import SwitchSchedule
from nilmchaos.circuit import SampledSeries, rms_series, simulate
from nilmchaos.kernel import KernelModel, load_model, mse
from nilmchaos.pipeline import ConfigError


def small_doc(**sections):
    doc = {"dataset": {"n_samples": 200, "n_train": 120, "n_valid": 80},
           "regression": {"epochs": 20}}
    for name, values in sections.items():
        doc[name] = dict(doc.get(name, {}), **values)
    return doc


def small_config(tmp_path, **sections):
    cfg = pipeline.config_from_dict(small_doc(**sections))
    return replace(cfg, paths=cfg.paths.resolved(tmp_path))


def read_csv(path):
    with open(path, newline="") as fh:
        return [r for r in csv.reader(fh) if not r[0].startswith("#")]


def test_defaults_follow_experiment():
    cfg = pipeline.default_config()
    assert (cfg.dataset.n_samples, cfg.dataset.n_train, cfg.dataset.n_valid) == (2000, 1350, 650)
    assert cfg.regression.d == 8 and cfg.network.M == 4


def test_config_file_matches_defaults():
    a = pipeline.load_config("configs/default.toml")
    b = pipeline.default_config()
    assert a.network == b.network and a.dataset == b.dataset and a.regression == b.regression


@pytest.mark.parametrize("doc, match", [
    ({"network": {"colour": 1}}, "unknown key"),
    ({"extra": {}}, "unknown key"),
    ({"regression": {"gamma": 1}}, "unknown key"),
    ({"network": {"loads": [{"R": 1, "L": 1, "C": 1, "tau": 1, "Z": 2}]}}, "unknown key"),
    ({"network": {"loads": [{"R": 1, "L": 1, "C": 1}]}}, "missing"),
    ({"network": {"loads": [{"R": 1, "L": -1, "C": 1, "tau": 1}]}}, "loads\\[0\\]"),
    ({"dataset": {"n_samples": 10, "n_train": 8, "n_valid": 5}}, "exceeds"),
    ({"regression": {"p": "wide"}}, "regression.p"),
    ({"regression": {"d": "8"}}, "regression.d"),
    ({"network": {"dt": 1e-4}}, "divide"),
    ({"network": {"integrator": "euler"}}, "integrator"),
    ({"network": {"seed": True}}, "network.seed"),
])
def test_config_errors(doc, match):
    with pytest.raises(ConfigError, match=match):
        pipeline.config_from_dict(doc)


def test_load_config_paths_and_seed_precedence(tmp_path, monkeypatch):
    path = tmp_path / "c.toml"
    path.write_text('[network]\nseed = 0.3\n[paths]\nmodel_file = "m/model.json"\n')
    monkeypatch.delenv(pipeline.SEED_ENV, raising=False)
    cfg = pipeline.load_config(path)
    assert cfg.network.seed == 0.3
    assert cfg.paths.model_file == str(tmp_path / "m" / "model.json")
    monkeypatch.setenv(pipeline.SEED_ENV, "0.4")
    assert pipeline.load_config(path).network.seed == 0.4
    assert pipeline.load_config(path, seed=0.6).network.seed == 0.6


def test_bad_toml(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[network\n")
    with pytest.raises(ConfigError):
        pipeline.load_config(path)


def test_simulate_writes_expected_rows(tmp_path):
    cfg = small_config(tmp_path)
    series = pipeline.cmd_simulate(cfg, quiet=True)
    rows = read_csv(cfg.paths.dataset_csv)
    assert rows[0] == ["t", "i_rms", "S1", "S2", "S3", "S4"]
    assert len(rows) == 201
    # First window starts after one discarded rms_window.
    assert series.times[0] == pytest.approx(2 * cfg.network.rms_window)


def test_dataset_csv_round_trip(tmp_path):
    cfg = small_config(tmp_path)
    series = pipeline.cmd_simulate(cfg, quiet=True)
    back = pipeline.read_dataset(cfg.paths.dataset_csv)
    assert np.array_equal(back.times, series.times)
    assert np.array_equal(back.i_rms, series.i_rms)
    assert np.array_equal(back.switch_bits, series.switch_bits)
    assert back.i_max == series.i_max


def test_zero_forcing_dataset(tmp_path, capsys):
    cfg = small_config(tmp_path, network={"epsilon": 0.0})
    series = pipeline.cmd_simulate(cfg)
    assert np.all(series.i_rms == 0.0) and series.i_max == 0.0
    assert "i_max = 0.0" in capsys.readouterr().out


def test_single_sample_dataset(tmp_path):
    cfg = small_config(tmp_path, dataset={"n_samples": 1, "n_train": 0, "n_valid": 0})
    pipeline.cmd_simulate(cfg, quiet=True)
    assert len(read_csv(cfg.paths.dataset_csv)) == 2


def test_short_t_end_is_rejected(tmp_path):
    cfg = small_config(tmp_path, network={"t_end": 0.5})
    with pytest.raises(ConfigError, match="t_end"):
        pipeline.cmd_simulate(cfg, quiet=True)


def test_train_rejects_empty_training_segment(tmp_path):
    cfg = small_config(tmp_path, dataset={"n_train": 0})
    pipeline.cmd_simulate(cfg, quiet=True)
    with pytest.raises(ConfigError, match="n_train"):
        pipeline.cmd_train(cfg, quiet=True)


def test_train_rejects_short_dataset(tmp_path):
    cfg = small_config(tmp_path)
    pipeline.cmd_simulate(cfg, quiet=True)
    bigger = replace(cfg, dataset=pipeline.DatasetSpec(500, 400, 100))
    with pytest.raises(ConfigError, match="rows"):
        pipeline.cmd_train(bigger, quiet=True)


def planted_series(n=40):
    # Well-separated currents: any bit pattern is representable by the expansion.
    rng = np.random.default_rng(5)
    bits = rng.integers(0, 2, (n, 2)).astype(np.int8)
    i_rms = 3.0 * np.arange(n, dtype=float) + 1.0
    return SampledSeries(np.arange(n, dtype=float), i_rms, bits, float(i_rms.max()))


def test_train_on_planted_dataset(tmp_path):
    cfg = small_config(tmp_path, dataset={"n_samples": 40, "n_train": 30, "n_valid": 10},
                       regression={"d": 1, "p": 0.5, "epochs": 500})
    model = pipeline.cmd_train(cfg, planted_series(), quiet=True)
    trace = pipeline.read_trace(cfg.paths.trace_csv)
    assert len(trace) == 500
    assert trace[-1, 1] < 1e-4
    assert trace[-1, 1] == model.trace.train_mse[-1]
    first = open(cfg.paths.trace_csv).readline()
    assert first == f"# monitored_index={model.monitor_index} seed=0\n"
    # Converged planted fit evaluates to near-zero training error.
    report = pipeline.cmd_eval(cfg, planted_series(), model, quiet=True)
    assert report["E_train"] < 1e-4
    assert report["train_exact_state_accuracy"] == 1.0


def test_train_segment_hygiene(default_run):
    cfg = default_run["cfg"]
    model = load_model(cfg.paths.model_file)
    series = default_run["series"]
    n_train, d = cfg.dataset.n_train, cfg.regression.d
    windows = np.lib.stride_tricks.sliding_window_view(series.i_rms, d)
    assert len(model.vectors) == n_train - d + 1
    np.testing.assert_array_equal(model.vectors, windows[:n_train - d + 1])


def test_default_trace_descends(default_run):
    trace = pipeline.read_trace(default_run["cfg"].paths.trace_csv)
    assert len(trace) == default_run["cfg"].regression.epochs
    assert np.all(np.isfinite(trace)) and trace[-1, 1] < trace[0, 1]


def test_report_matches_predictions_csv(default_run):
    cfg = default_run["cfg"]
    report = default_run["report"]
    rows = read_csv(cfg.paths.predictions_csv)
    header, body = rows[0], rows[1:]
    M = cfg.network.M
    assert header[:4] == ["segment", "t", "s_true", "s_pred"] and len(header) == 4 + 2 * M
    for name, key in (("train", "E_train"), ("valid", "E_valid")):
        part = [r for r in body if r[0] == name]
        s_true = np.array([float(r[2]) for r in part])
        s_pred = np.array([float(r[3]) for r in part])
        assert abs(mse(s_pred, s_true) - report[key]) <= 1e-12
    valid = np.array([[int(x) for x in r[4:]] for r in body if r[0] == "valid"])
    acc = (valid[:, :M] == valid[:, M:]).mean(axis=0)
    np.testing.assert_allclose(acc, report["per_load_bit_accuracy"], rtol=0, atol=1e-15)
    assert report["rows_train"] == 1343 and report["rows_valid"] == 643
    assert report["exact_state_accuracy"] <= min(report["per_load_bit_accuracy"])


def test_constant_mean_model_scores_about_one(default_run):
    cfg = default_run["cfg"]
    series = default_run["series"]
    trained = load_model(cfg.paths.model_file)
    train_targets = np.array([float(r[2]) for r in read_csv(cfg.paths.predictions_csv)[1:]
                              if r[0] == "train"])
    c = train_targets.mean()
    model = KernelModel(vectors=trained.vectors[:1], weights=[0.0], w0=c, p=1.0, d=trained.d,
                        i_max=trained.i_max, M=trained.M)
    out = replace(cfg, paths=replace(
        cfg.paths, report_file=str(default_run["dir"] / "const.json"),
        predictions_csv=str(default_run["dir"] / "const.csv")))
    report = pipeline.cmd_eval(out, series, model, quiet=True)
    valid = np.array([float(r[2]) for r in read_csv(out.paths.predictions_csv)[1:]
                      if r[0] == "valid"])
    expect = (valid.var() + (valid.mean() - c) ** 2) / valid.var()
    assert report["normalized_E_valid"] == pytest.approx(expect, rel=1e-12)
    assert report["normalized_E_valid"] == pytest.approx(1.0, abs=0.1)


def test_perfect_predictions(tmp_path):
    series = planted_series()
    cfg = small_config(tmp_path, dataset={"n_samples": 40, "n_train": 30, "n_valid": 10},
                       regression={"d": 1, "p": 0.01})
    codes = series.switch_bits @ np.array([1, 2])
    s = series.i_rms[:30].max() / 2 * codes
    # Narrow kernel with weights equal to the targets reproduces them at the samples.
    model = KernelModel(vectors=series.i_rms[:, None], weights=s, w0=0.0, p=0.01, d=1,
                        i_max=series.i_rms[:30].max(), M=2)
    report = pipeline.cmd_eval(cfg, series, model, quiet=True)
    assert report["per_load_bit_accuracy"] == [1.0, 1.0]
    assert report["exact_state_accuracy"] == 1.0 and report["E_valid"] == 0.0


def test_eval_rejects_mismatched_d(tmp_path, default_run):
    cfg = small_config(tmp_path, regression={"d": 5})
    model = load_model(default_run["cfg"].paths.model_file)
    with pytest.raises(ConfigError, match="d="):
        pipeline.cmd_eval(cfg, default_run["series"], model, quiet=True)


def test_disaggregate_all_off(tmp_path, default_run):
    net = default_run["cfg"].network
    cfg = replace(small_config(tmp_path), network=net)
    off = SwitchSchedule(np.array([net.K]), (1e12,) * net.M, net.K)
    sim_cfg = replace(net, t_end=60 * net.rms_window)
    series = rms_series(simulate(sim_cfg, off), sim_cfg, start=net.window_steps)
    current = tmp_path / "current.csv"
    pipeline.write_dataset(series, current)
    bits = pipeline.cmd_disaggregate(default_run["cfg"].paths.model_file, current,
                                     tmp_path / "states.csv", quiet=True)
    rows = read_csv(tmp_path / "states.csv")
    assert rows[0] == ["t", "load_1", "load_2", "load_3", "load_4"]
    assert len(rows) - 1 == len(series) - 8 + 1
    assert np.all(bits == 0)


def test_disaggregate_boundaries(tmp_path, default_run):
    model_file = default_run["cfg"].paths.model_file
    path = tmp_path / "cur.csv"
    path.write_text("i_rms\n" + "\n".join(["5.0"] * 8) + "\n")
    pipeline.cmd_disaggregate(model_file, path, tmp_path / "o.csv", quiet=True)
    assert len(read_csv(tmp_path / "o.csv")) == 2
    path.write_text("i_rms\n" + "\n".join(["5.0"] * 7) + "\n")
    with pytest.raises(ConfigError, match="at least"):
        pipeline.cmd_disaggregate(model_file, path, tmp_path / "o.csv", quiet=True)
    path.write_text("t,current\n0,1.0\n")
    with pytest.raises(ConfigError, match="i_rms"):
        pipeline.cmd_disaggregate(model_file, path, tmp_path / "o.csv", quiet=True)


def test_report_is_json_with_config_echo(default_run):
    with open(default_run["cfg"].paths.report_file) as fh:
        report = json.load(fh)
    assert report["config"]["dataset"]["n_train"] == 1350
    assert report["config"]["network"]["loads"][0]["R"] == 100.0
    assert len(report["per_load_bit_accuracy"]) == 4
