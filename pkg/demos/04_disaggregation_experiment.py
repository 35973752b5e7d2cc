"""End-to-end experiment: 2000 RMS samples, 1350 train / 650 validation, d = 8.

Run with ``python demos/04_disaggregation_experiment.py``. Output files land in
``demos/out/``. The same run is available as ``nilmchaos run-all``.
"""
# %%
from dataclasses import replace
from pathlib import Path

import numpy as np

from nilmchaos import pipeline

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
cfg = pipeline.default_config()
cfg = replace(cfg, paths=cfg.paths.resolved(out))

# %% Simulate, train and evaluate.
report = pipeline.run_all(cfg)

# %% Convergence of the bias and of one monitored weight (trace.csv).
trace = pipeline.read_trace(cfg.paths.trace_csv)
for row in trace[[0, 9, 99, -1]]:
    print(f"epoch {int(row[0]):3d}: train MSE {row[1]:.4f}  w0 {row[2]:+.4f}  w_r {row[3]:+.4f}")

# %% Validation segment: true vs predicted encoded state (predictions.csv).
series = pipeline.read_dataset(cfg.paths.dataset_csv)
model = pipeline.load_model(cfg.paths.model_file)
states = pipeline.disaggregate(model, series.i_rms[1350:2000])
truth = series.switch_bits[1350:1350 + len(states)]
print("first 20 validation samples (true | decoded):")
for t, d in zip(truth[:20], states[:20]):
    print("  ", "".join(map(str, t)), "|", "".join(map(str, d)))
print(f"validation exact-state accuracy: {np.mean(np.all(truth == states, axis=1)):.4f}")
print(f"normalized validation error: {report['normalized_E_valid']:.5f}")
