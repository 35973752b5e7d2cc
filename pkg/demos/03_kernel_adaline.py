"""Kernel-Adaline on a planted kernel expansion.

Run with ``python demos/03_kernel_adaline.py``.
"""
# %%
import numpy as np

from nilmchaos.encoding import EncodingParams
from nilmchaos.kernel import TrainingSet, gram_matrix, predict_many, train_kernel_adaline

# %% Targets generated from a known 20-term Gaussian expansion.
rng = np.random.default_rng(1)
X = rng.uniform(0, 1, (20, 8))
p = 0.5
y = gram_matrix(X, p) @ rng.normal(size=20) + 0.5
data = TrainingSet(X, y, np.arange(20), np.zeros((20, 1), dtype=np.int8), EncodingParams(1.0, 1))

# %% Per-sample LMS drives the training error to zero.
model = train_kernel_adaline(data, p=p, eta=0.05, epochs=500)
tr = model.trace
for epoch in (1, 10, 50, 100, 500):
    print(f"epoch {epoch:3d}: MSE {tr.train_mse[epoch - 1]:.3e}  w0 {tr.w0[epoch - 1]:+.4f}  "
          f"w_{tr.monitor_index} {tr.w_r[epoch - 1]:+.4f}")
print("max |prediction - target|:", np.max(np.abs(predict_many(model, X) - y)))

# %% A learning rate that is too large is reported instead of producing NaNs.
try:
    train_kernel_adaline(data, p=p, eta=50.0, epochs=500)
except ArithmeticError as exc:
    print(exc)
