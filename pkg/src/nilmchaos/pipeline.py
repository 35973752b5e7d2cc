"""Config-driven simulate -> train -> eval -> disaggregate workflow and file formats."""

import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .chaos import DEFAULT_K, DEFAULT_SEED
from .circuit import LoadSpec, NetworkConfig, SampledSeries, default_loads, horizon_steps, \
    rms_series, simulate
from .encoding import EncodingParams, code_of, decode_many
from .kernel import KernelModel, advance_vectors, build_advance_vectors, load_model, mse, \
    predict_many, save_model, train_kernel_adaline

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SEED_ENV = "NILM_SEED"


class ConfigError(ValueError):
    """Invalid pipeline configuration or input file."""


@dataclass(frozen=True)
class DatasetSpec:
    n_samples: int = 2000
    n_train: int = 1350
    n_valid: int = 650


@dataclass(frozen=True)
class RegressionSpec:
    d: int = 8
    p: object = "auto"
    eta: float = 0.05
    epochs: int = 300
    seed: int = 0
    shuffle: bool = False


@dataclass(frozen=True)
class Paths:
    dataset_csv: str = "dataset.csv"
    model_file: str = "model.json"
    report_file: str = "report.json"
    trace_csv: str = "trace.csv"
    predictions_csv: str = "predictions.csv"
    states_csv: str = "states.csv"

    def resolved(self, base):
        base = Path(base)
        return Paths(**{k: str(base / v) for k, v in asdict(self).items()})


@dataclass(frozen=True)
class PipelineConfig:
    network: NetworkConfig
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    regression: RegressionSpec = field(default_factory=RegressionSpec)
    paths: Paths = field(default_factory=Paths)

    def to_dict(self):
        net = asdict(self.network)
        net["loads"] = [asdict(ld) for ld in self.network.loads]
        if net["load_seeds"] is None:
            del net["load_seeds"]
        else:
            net["load_seeds"] = list(net["load_seeds"])
        return {"network": net, "dataset": asdict(self.dataset),
                "regression": asdict(self.regression), "paths": asdict(self.paths)}


_NETWORK_KEYS = {"R_src", "epsilon", "w", "K", "seed", "dt", "t_end", "rms_window",
                 "sample_stride", "integrator", "load_seeds", "loads"}
_LOAD_KEYS = {"R", "L", "C", "tau"}


def _check_keys(section, allowed, where):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")


def _typed(section, where, spec):
    """Copy ``section`` into keyword arguments, checking each value's type."""
    out = {}
    for key, kinds in spec.items():
        if key not in section:
            continue
        value = section[key]
        if isinstance(value, bool) and bool not in kinds:
            raise ConfigError(f"{where}.{key}: expected {kinds[0].__name__}, got a boolean")
        if not isinstance(value, kinds):
            raise ConfigError(f"{where}.{key}: expected {kinds[0].__name__}, got {value!r}")
        out[key] = float(value) if kinds[0] is float and not isinstance(value, str) else value
    return out


def config_from_dict(doc):
    """Build and validate a :class:`PipelineConfig` from a nested mapping."""
    _check_keys(doc, {"network", "dataset", "regression", "paths"}, "top level")
    num = (float, int)
    net = dict(doc.get("network", {}))
    _check_keys(net, _NETWORK_KEYS, "network")
    dataset = DatasetSpec(**_typed(doc.get("dataset", {}), "dataset",
                                   {"n_samples": (int,), "n_train": (int,), "n_valid": (int,)}))
    _check_keys(doc.get("dataset", {}), asdict(DatasetSpec()), "dataset")
    _check_keys(doc.get("regression", {}), asdict(RegressionSpec()), "regression")
    regression = RegressionSpec(**_typed(doc.get("regression", {}), "regression", {
        "d": (int,), "p": (float, int, str), "eta": num, "epochs": (int,), "seed": (int,),
        "shuffle": (bool,)}))
    _check_keys(doc.get("paths", {}), asdict(Paths()), "paths")
    paths = Paths(**_typed(doc.get("paths", {}), "paths", {k: (str,) for k in asdict(Paths())}))

    if isinstance(regression.p, str) and regression.p != "auto":
        raise ConfigError(f"regression.p must be a positive number or \"auto\", got {regression.p!r}")
    if not isinstance(regression.p, str) and not regression.p > 0:
        raise ConfigError(f"regression.p must be > 0, got {regression.p!r}")
    if regression.d < 1:
        raise ConfigError(f"regression.d must be >= 1, got {regression.d}")
    if not regression.eta > 0:
        raise ConfigError(f"regression.eta must be > 0, got {regression.eta}")
    if regression.epochs < 1:
        raise ConfigError(f"regression.epochs must be >= 1, got {regression.epochs}")
    if dataset.n_samples < 1 or dataset.n_train < 0 or dataset.n_valid < 0:
        raise ConfigError("dataset sizes must be non-negative and n_samples >= 1")
    if dataset.n_train + dataset.n_valid > dataset.n_samples:
        raise ConfigError(f"n_train + n_valid = {dataset.n_train + dataset.n_valid} exceeds "
                          f"n_samples = {dataset.n_samples}")

    w = float(net.get("w", 2 * math.pi * 60))
    if not w > 0:
        raise ConfigError(f"network.w must be > 0, got {w!r}")
    period = 2 * math.pi / w
    loads_doc = net.pop("loads", None)
    if loads_doc is None:
        loads = default_loads(period)
    else:
        if not isinstance(loads_doc, list) or not loads_doc:
            raise ConfigError("network.loads must be a non-empty list of tables")
        loads = []
        for n, ld in enumerate(loads_doc):
            where = f"network.loads[{n}]"
            _check_keys(ld, _LOAD_KEYS, where)
            missing = _LOAD_KEYS - set(ld)
            if missing:
                raise ConfigError(f"{where}: missing key(s) {', '.join(sorted(missing))}")
            kw = _typed(ld, where, {k: num for k in _LOAD_KEYS})
            try:
                loads.append(LoadSpec(**kw))
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from None
    kw = _typed(net, "network", {
        "R_src": num, "epsilon": num, "w": num, "K": num, "seed": num, "dt": num,
        "t_end": num, "rms_window": num, "sample_stride": (int,), "integrator": (str,),
        "load_seeds": (list,)})
    kw.setdefault("w", w)
    kw.setdefault("dt", period / 200)
    kw.setdefault("rms_window", period)
    kw.setdefault("sample_stride", 200)
    kw.setdefault("K", DEFAULT_K)
    kw.setdefault("seed", DEFAULT_SEED)
    if "load_seeds" in kw:
        kw["load_seeds"] = tuple(float(s) for s in kw["load_seeds"])
    if "t_end" not in kw:
        if not kw["dt"] > 0:
            raise ConfigError(f"network.dt must be > 0, got {kw['dt']!r}")
        W = kw["rms_window"] / kw["dt"]
        kw["t_end"] = horizon_steps(dataset.n_samples, W, kw["sample_stride"]) * kw["dt"]
    try:
        network = NetworkConfig(loads=tuple(loads), **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"network: {exc}") from None
    return PipelineConfig(network, dataset, regression, paths)


def default_config():
    return config_from_dict({})


def load_config(path=None, seed=None):
    """Read a TOML config; relative output paths resolve against its directory.

    The chaos seed is taken from ``seed`` if given, else from ``$NILM_SEED``,
    else from the file.
    """
    if path is None:
        doc, base = {}, Path.cwd()
    else:
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        base = path.parent
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = float(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"${SEED_ENV} is not a number: {os.environ[SEED_ENV]!r}") from None
    if seed is not None:
        doc = dict(doc)
        doc["network"] = dict(doc.get("network", {}), seed=float(seed))
    cfg = config_from_dict(doc)
    return replace(cfg, paths=cfg.paths.resolved(base))


# -- CSV helpers ---------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_dataset(series, path):
    M = series.M
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = _writer(fh)
        out.writerow(["t", "i_rms"] + [f"S{k + 1}" for k in range(M)])
        for t, i, bits in zip(series.times, series.i_rms, series.switch_bits):
            out.writerow([_fmt(t), _fmt(i)] + [str(int(b)) for b in bits])


def _read_rows(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise ConfigError(f"{path}: missing header row")
    return rows[0], rows[1:]


def read_dataset(path):
    header, rows = _read_rows(path)
    if header[:2] != ["t", "i_rms"] or len(header) < 3 or \
            header[2:] != [f"S{k + 1}" for k in range(len(header) - 2)]:
        raise ConfigError(f"{path}: dataset header must be t,i_rms,S1,...,SM; got {header}")
    try:
        data = np.array([[float(x) for x in r[:2]] for r in rows]).reshape(len(rows), 2)
        bits = np.array([[int(x) for x in r[2:]] for r in rows], dtype=np.int8)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    bits = bits.reshape(len(rows), len(header) - 2)
    if not np.isin(bits, (0, 1)).all():
        raise ConfigError(f"{path}: switch bits must be 0 or 1")
    i_rms = data[:, 1]
    return SampledSeries(times=data[:, 0], i_rms=i_rms, switch_bits=bits,
                         i_max=float(i_rms.max()) if len(i_rms) else 0.0)


def read_current(path):
    """``(times, i_rms)`` from any CSV with an ``i_rms`` column; ``t`` is optional."""
    header, rows = _read_rows(path)
    if "i_rms" not in header:
        raise ConfigError(f"{path}: no i_rms column in header {header}")
    col = header.index("i_rms")
    try:
        i_rms = np.array([float(r[col]) for r in rows])
        times = np.array([float(r[header.index("t")]) for r in rows]) if "t" in header \
            else np.arange(len(rows), dtype=float)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return times, i_rms


def write_trace(trace, path, seed):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# monitored_index={trace.monitor_index} seed={seed}\n")
        out = _writer(fh)
        out.writerow(["epoch", "train_mse", "w0", "w_r"])
        for row in zip(trace.epoch, trace.train_mse, trace.w0, trace.w_r):
            out.writerow([str(int(row[0]))] + [_fmt(x) for x in row[1:]])


def read_trace(path):
    header, rows = _read_rows(path)
    if header != ["epoch", "train_mse", "w0", "w_r"]:
        raise ConfigError(f"{path}: unexpected trace header {header}")
    return np.array([[float(x) for x in r] for r in rows])


def _log(quiet, *args):
    if not quiet:
        print(*args)


# -- commands ------------------------------------------------------------------

def simulate_series(cfg):
    """Simulate the network and cut ``n_samples`` RMS samples after the transient."""
    net = cfg.network
    W = net.window_steps
    needed = horizon_steps(cfg.dataset.n_samples, W, net.sample_stride, W)
    if net.n_steps < needed:
        raise ConfigError(f"t_end={net.t_end!r} covers {net.n_steps} steps; "
                          f"{cfg.dataset.n_samples} samples need {needed}")
    traj = simulate(net)
    return rms_series(traj, net, start=W, n_samples=cfg.dataset.n_samples)


def switching_summary(series):
    bits = series.switch_bits
    on = bits.mean(axis=0) if len(bits) else np.zeros(series.M)
    flips = np.abs(np.diff(bits.astype(int), axis=0)).sum(axis=0)
    return [{"load": k + 1, "on_fraction": float(on[k]), "transitions": int(flips[k])}
            for k in range(series.M)]


def _ensure_parents(*paths):
    for p in paths:
        Path(p).parent.mkdir(parents=True, exist_ok=True)


def cmd_simulate(cfg, quiet=False):
    series = simulate_series(cfg)
    _ensure_parents(cfg.paths.dataset_csv)
    write_dataset(series, cfg.paths.dataset_csv)
    _log(quiet, f"wrote {len(series)} samples to {cfg.paths.dataset_csv}")
    _log(quiet, f"i_max = {series.i_max!r} A")
    for row in switching_summary(series):
        _log(quiet, f"  load {row['load']}: on {row['on_fraction']:.3f} of samples, "
                    f"{row['transitions']} transitions")
    return series


def training_params(cfg, series):
    n_train = cfg.dataset.n_train
    return EncodingParams(float(series.i_rms[:n_train].max()), series.M)


def cmd_train(cfg, series=None, quiet=False):
    if series is None:
        series = read_dataset(cfg.paths.dataset_csv)
    n_train, reg = cfg.dataset.n_train, cfg.regression
    if n_train < 1:
        raise ConfigError("n_train must be >= 1 to train")
    if len(series) < n_train:
        raise ConfigError(f"dataset has {len(series)} rows, n_train={n_train}")
    if n_train < reg.d:
        raise ConfigError(f"training segment of {n_train} rows is shorter than d={reg.d}")
    data = build_advance_vectors(series, reg.d, (0, n_train), training_params(cfg, series))
    model = train_kernel_adaline(data, reg.p, reg.eta, reg.epochs, reg.seed, reg.shuffle)
    _ensure_parents(cfg.paths.model_file, cfg.paths.trace_csv)
    save_model(model, cfg.paths.model_file)
    write_trace(model.trace, cfg.paths.trace_csv, reg.seed)
    tr = model.trace
    _log(quiet, f"trained on {len(data)} advance vectors (d={reg.d}, p={model.p:.6g}, "
                f"eta={reg.eta}, epochs={reg.epochs})")
    _log(quiet, f"train MSE: epoch 1 {tr.train_mse[0]:.6g} -> epoch {reg.epochs} "
                f"{tr.train_mse[-1]:.6g}; monitored w_r index r={tr.monitor_index}")
    return model


def normalized_error(E, truth):
    var = float(np.var(truth))
    return E / var if var > 0 else None


def _segment_eval(model, series, start, stop):
    data = build_advance_vectors(series, model.d, (start, stop), model.encoding)
    pred = predict_many(model, data.vectors)
    decoded = decode_many(pred, model.encoding)
    E = mse(pred, data.targets)
    per_load = (decoded == data.bits).mean(axis=0)
    exact = float(np.mean(code_of(decoded) == code_of(data.bits)))
    return data, pred, decoded, {
        "rows": len(data), "E": E, "normalized_E": normalized_error(E, data.targets),
        "per_load_bit_accuracy": [float(a) for a in per_load], "exact_state_accuracy": exact}


def cmd_eval(cfg, series=None, model=None, quiet=False):
    if series is None:
        series = read_dataset(cfg.paths.dataset_csv)
    if model is None:
        model = load_model(cfg.paths.model_file)
    n_train, n_valid = cfg.dataset.n_train, cfg.dataset.n_valid
    if model.d != cfg.regression.d:
        raise ConfigError(f"model was trained with d={model.d}, config has d={cfg.regression.d}")
    if model.M != series.M:
        raise ConfigError(f"model has M={model.M} loads, dataset has {series.M}")
    if len(series) < n_train + n_valid:
        raise ConfigError(f"dataset has {len(series)} rows, need n_train + n_valid = "
                          f"{n_train + n_valid}")
    if min(n_train, n_valid) < model.d:
        raise ConfigError(f"each segment needs at least d={model.d} rows")

    segments = {"train": (0, n_train), "valid": (n_train, n_train + n_valid)}
    results = {}
    M = model.M
    _ensure_parents(cfg.paths.predictions_csv, cfg.paths.report_file)
    with open(cfg.paths.predictions_csv, "w", encoding="utf-8", newline="") as fh:
        out = _writer(fh)
        out.writerow(["segment", "t", "s_true", "s_pred"] + [f"S{k + 1}" for k in range(M)]
                     + [f"D{k + 1}" for k in range(M)])
        for name, (a, b) in segments.items():
            data, pred, decoded, res = _segment_eval(model, series, a, b)
            results[name] = res
            for n, j in enumerate(data.indices):
                out.writerow([name, _fmt(series.times[j]), _fmt(data.targets[n]), _fmt(pred[n])]
                             + [str(int(x)) for x in data.bits[n]]
                             + [str(int(x)) for x in decoded[n]])

    tr, va = results["train"], results["valid"]
    report = {
        "E_train": tr["E"], "E_valid": va["E"],
        "normalized_E_train": tr["normalized_E"], "normalized_E_valid": va["normalized_E"],
        "per_load_bit_accuracy": va["per_load_bit_accuracy"],
        "exact_state_accuracy": va["exact_state_accuracy"],
        "train_per_load_bit_accuracy": tr["per_load_bit_accuracy"],
        "train_exact_state_accuracy": tr["exact_state_accuracy"],
        "rows_train": tr["rows"], "rows_valid": va["rows"],
        "i_max": model.i_max, "p": model.p, "d": model.d, "M": M,
        "encoding_note": model.encoding_note,
        "config": cfg.to_dict(),
    }
    with open(cfg.paths.report_file, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    _log(quiet, f"E_train = {tr['E']:.6g}  E_valid = {va['E']:.6g}  "
                f"E_valid/Var(s) = {_maybe(va['normalized_E'])}")
    _log(quiet, "validation per-load bit accuracy: "
         + ", ".join(f"{a:.4f}" for a in va["per_load_bit_accuracy"])
         + f"; exact joint state accuracy: {va['exact_state_accuracy']:.4f}")
    return report


def _maybe(x):
    return "n/a" if x is None else f"{x:.6g}"


def disaggregate(model, i_rms):
    """Decoded per-load bits for every in-advance window of an RMS current series."""
    X = advance_vectors(i_rms, model.d)
    return decode_many(predict_many(model, X), model.encoding)


def cmd_disaggregate(model_file, current_csv, out_csv, quiet=False):
    model = load_model(model_file)
    times, i_rms = read_current(current_csv)
    if len(i_rms) < model.d:
        raise ConfigError(f"{current_csv}: {len(i_rms)} samples, need at least d={model.d}")
    bits = disaggregate(model, i_rms)
    _ensure_parents(out_csv)
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        out = _writer(fh)
        out.writerow(["t"] + [f"load_{k + 1}" for k in range(model.M)])
        for t, row in zip(times, bits):
            out.writerow([_fmt(t)] + [str(int(b)) for b in row])
    _log(quiet, f"wrote {len(bits)} rows of per-load states to {out_csv}")
    return bits


def run_all(cfg, quiet=False):
    series = cmd_simulate(cfg, quiet)
    model = cmd_train(cfg, series, quiet)
    return cmd_eval(cfg, series, model, quiet)
