"""Chaotic on/off switching from the logistic map.

Run with ``python demos/01_chaotic_switching.py``.
"""
# %%
import numpy as np

from nilmchaos.chaos import build_schedule, generate_sequence, logistic_step, switch_value

# %% The map 4x(1-x) keeps orbits inside [0, 1] and has fixed points at 0 and 3/4.
x = 0.2
orbit = [x]
for _ in range(5):
    x = logistic_step(x)
    orbit.append(x)
print("orbit from 0.2:", np.round(orbit, 4))

# %% Binarize: K (switch open) at or below 1/2, 1 (switch closed) above.
K = 1e5
seq = generate_sequence(0.123456789, 10_000, K)
print("first 12 switch values:", seq[:12])
print(f"fraction closed over 1e4 steps: {np.mean(seq == 1.0):.4f}")

# %% Degenerate seeds collapse onto a fixed point and are refused.
try:
    generate_sequence(0.25, 10, K)
except ValueError as exc:
    print("rejected:", exc)

# %% Every load reads the same orbit, dilated by its own tau: S_j(t) = r[floor(t / tau_j)].
period = 1 / 60
taus = [3 * period, 5 * period, 7 * period, 11 * period]
sched = build_schedule(taus, t_end=1.0)
times = np.arange(0, 1.0, period)
bits = np.array([[int(switch_value(sched, j, t + period / 2) == 1.0) for j in range(4)]
                 for t in times])
for j in range(4):
    print(f"load {j + 1}: " + "".join("#" if b else "." for b in bits[:, j]))
