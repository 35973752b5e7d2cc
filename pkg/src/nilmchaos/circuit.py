"""Switched RLC network: ODE right-hand side, integrators and RMS sampling.

Each load ``j`` is a series RLC branch whose resistance is multiplied by the
switch value ``S_j(t)`` (1 when on, ``K`` when off). All branches share a
source resistance ``R_src`` carrying the total current, giving

    L_j q_j'' = eps cos(w t) - R_src sum_k q_k' - R_j S_j(t) q_j' - q_j / C_j.

Two fixed-step integrators are provided. ``"rk4"`` is classical Runge-Kutta.
``"exact"`` holds the switch states constant over each step and advances the
linear system with its matrix exponential; it stays stable when an off branch
makes the system stiff (``R_j K / L_j`` far beyond ``2.8 / dt``).
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .chaos import DEFAULT_K, DEFAULT_SEED, ScheduleExhausted, SwitchSchedule, \
    build_schedule, switch_value

INTEGRATORS = ("exact", "rk4")

# RK4 is stable on the negative real axis for |lambda dt| below this bound.
RK4_STABILITY_LIMIT = 2.785


class NonFiniteState(ArithmeticError):
    """Raised when integration produces NaN or infinite charges or currents."""


@dataclass(frozen=True)
class LoadSpec:
    R: float
    L: float
    C: float
    tau: float

    def __post_init__(self):
        for name in ("R", "L", "C", "tau"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ValueError(f"load {name} must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class NetworkConfig:
    """Source, loads, switching and integration settings for one simulation."""

    loads: tuple
    R_src: float = 0.5
    epsilon: float = 170.0
    w: float = 2 * math.pi * 60
    K: float = DEFAULT_K
    seed: float = DEFAULT_SEED
    dt: float = 2 * math.pi / (2 * math.pi * 60) / 200
    t_end: float = 1.0
    rms_window: float = 1 / 60
    sample_stride: int = 200
    integrator: str = "exact"
    load_seeds: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "loads", tuple(self.loads))
        if len(self.loads) < 1:
            raise ValueError("network needs at least one load")
        if not all(isinstance(ld, LoadSpec) for ld in self.loads):
            raise TypeError("loads must be LoadSpec instances")
        if not self.R_src >= 0:
            raise ValueError(f"R_src must be >= 0, got {self.R_src!r}")
        if not self.K > 1:
            raise ValueError(f"K must exceed 1, got {self.K!r}")
        for name in ("dt", "t_end", "rms_window"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError(f"sample_stride must be an integer >= 1, got {self.sample_stride!r}")
        ratio = self.rms_window / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError(f"dt={self.dt!r} does not divide rms_window={self.rms_window!r}")
        if self.t_end < self.rms_window:
            raise ValueError("t_end must be at least rms_window")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.load_seeds is not None:
            object.__setattr__(self, "load_seeds", tuple(self.load_seeds))
            if len(self.load_seeds) != len(self.loads):
                raise ValueError("load_seeds needs one seed per load")

    @property
    def M(self):
        return len(self.loads)

    @property
    def period(self):
        return 2 * math.pi / self.w if self.w else math.inf

    @property
    def window_steps(self):
        return int(round(self.rms_window / self.dt))

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def arrays(self):
        R = np.array([ld.R for ld in self.loads])
        L = np.array([ld.L for ld in self.loads])
        C = np.array([ld.C for ld in self.loads])
        return R, L, C

    def schedule(self):
        return build_schedule([ld.tau for ld in self.loads], self.t_end + self.dt,
                              self.seed, self.K, self.load_seeds)


def default_loads(period=1 / 60):
    """Four loads with distinct impedances and sub-cycle transients."""
    values = [(100.0, 0.05, 1e-3), (50.0, 0.08, 5e-4), (30.0, 0.02, 2e-3), (15.0, 0.01, 4e-3)]
    return tuple(LoadSpec(R, L, C, m * period) for (R, L, C), m in zip(values, (3, 5, 7, 11)))


def default_network(**overrides):
    f = 60.0
    period = 1 / f
    params = dict(loads=default_loads(period), R_src=0.5, epsilon=170.0, w=2 * math.pi * f,
                  K=DEFAULT_K, seed=DEFAULT_SEED, dt=period / 200, rms_window=period,
                  sample_stride=200)
    params.update(overrides)
    if "t_end" not in params and params["dt"] > 0:
        W = params["rms_window"] / params["dt"]
        params["t_end"] = horizon_steps(2000, W, params["sample_stride"]) * params["dt"]
    return NetworkConfig(**params)


def horizon_steps(n_samples, window_steps, stride, discard_steps=None):
    """Integration steps needed to emit ``n_samples`` RMS windows after the discard."""
    window_steps = int(round(window_steps))
    if discard_steps is None:
        discard_steps = window_steps
    return discard_steps + window_steps + (n_samples - 1) * stride


@dataclass
class CircuitState:
    t: float
    q: np.ndarray
    dq: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.dq = np.asarray(self.dq, dtype=float)
        if self.q.shape != self.dq.shape or self.q.ndim != 1:
            raise ValueError("q and dq must be 1-D arrays of equal length")

    @classmethod
    def zeros(cls, M, t=0.0):
        return cls(t, np.zeros(M), np.zeros(M))

    @property
    def total_current(self):
        return float(self.dq.sum())

    def is_finite(self):
        return bool(np.isfinite(self.q).all() and np.isfinite(self.dq).all())


def _accel(t, q, dq, S, R, L, C, R_src, epsilon, w):
    return (epsilon * math.cos(w * t) - R_src * dq.sum() - R * S * dq - q / C) / L


def derivatives(state, config, schedule):
    """Time derivative ``(q', q'')`` stacked as one array of length ``2M``."""
    if state.q.size != config.M:
        raise ValueError(f"state has {state.q.size} loads, config has {config.M}")
    S = np.array([switch_value(schedule, j, state.t) for j in range(config.M)])
    R, L, C = config.arrays()
    ddq = _accel(state.t, state.q, state.dq, S, R, L, C, config.R_src, config.epsilon, config.w)
    return np.concatenate([state.dq, ddq])


def rk4_step(state, dt, config, schedule):
    """One classical RK4 step; switches are read at ``t``, ``t + dt/2`` and ``t + dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    M = config.M
    y = np.concatenate([state.q, state.dq])

    def f(t, y):
        return derivatives(CircuitState(t, y[:M], y[M:]), config, schedule)

    t = state.t
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    new = CircuitState(t + dt, y[:M], y[M:])
    if not new.is_finite():
        raise NonFiniteState(f"non-finite circuit state after step to t={float(t + dt)!r}")
    return new


@dataclass
class Trajectory:
    """Per-step simulation output.

    ``current[k]`` is the total current at ``t[k] = k dt``; ``bits[k]`` holds the
    on(1)/off(0) state of each switch during the step from ``t[k]`` to ``t[k+1]``.
    """

    t: np.ndarray
    current: np.ndarray
    bits: np.ndarray
    state: CircuitState = field(repr=False, default=None)


def _switch_table(schedule, times):
    """Switch values at each of ``times`` (vectorized ``switch_value``)."""
    M = schedule.n_loads
    out = np.empty((len(times), M))
    for j in range(M):
        seq = schedule.sequence_for(j)
        idx = np.floor(times / schedule.taus[j]).astype(np.int64)
        if len(idx) and idx.max() >= len(seq):
            bad = int(np.argmax(idx >= len(seq)))
            raise ScheduleExhausted(
                f"t={times[bad]!r} needs sequence index {idx[bad]} but only {len(seq)} "
                f"values were generated for load {j}")
        out[:, j] = seq[idx]
    return out


def rk4_stiffness(config):
    """Largest ``|lambda| dt`` estimate over on/off states, compared to RK4's bound."""
    R, L, _ = config.arrays()
    return float(np.max((R * config.K + config.R_src) / L) * config.dt)


def _augmented_matrix(S, R, L, C, R_src, epsilon, w):
    # State (q, q', cos wt, sin wt); the forcing pair rotates at angular rate w.
    M = len(R)
    A = np.zeros((2 * M + 2, 2 * M + 2))
    A[:M, M:2 * M] = np.eye(M)
    A[M:2 * M, :M] = np.diag(-1.0 / (L * C))
    A[M:2 * M, M:2 * M] = -R_src / L[:, None] * np.ones((M, M)) - np.diag(R * S / L)
    A[M:2 * M, 2 * M] = epsilon / L
    A[2 * M, 2 * M + 1] = -w
    A[2 * M + 1, 2 * M] = w
    return A


def simulate(config, schedule: Optional[SwitchSchedule] = None, initial=None):
    """Integrate from ``t = 0`` to ``t_end`` with the configured fixed step.

    Starts from zero charges and currents unless ``initial`` is given. The
    schedule defaults to one built from the config's seed, ``K`` and taus.
    """
    if schedule is None:
        schedule = config.schedule()
    if schedule.n_loads != config.M:
        raise ValueError("schedule and config disagree on the number of loads")
    M, dt, n = config.M, config.dt, config.n_steps
    R, L, C = config.arrays()
    state = initial if initial is not None else CircuitState.zeros(M)
    if state.q.size != M:
        raise ValueError("initial state has the wrong number of loads")

    t = np.arange(n + 1) * dt
    mid = _switch_table(schedule, t[:-1] + dt / 2)
    current = np.empty(n + 1)
    current[0] = state.total_current

    if config.integrator == "exact":
        x = np.concatenate([state.q, state.dq])
        on = mid == 1.0
        cache = {}
        w = config.w
        for k in range(n):
            key = on[k].tobytes()
            prop = cache.get(key)
            if prop is None:
                Phi = expm(_augmented_matrix(mid[k], R, L, C, config.R_src,
                                             config.epsilon, w) * dt)
                prop = cache[key] = (Phi[:2 * M, :2 * M].copy(), Phi[:2 * M, 2 * M:].copy())
            wt = w * t[k]
            x = prop[0] @ x + prop[1] @ np.array([math.cos(wt), math.sin(wt)])
            current[k + 1] = x[M:].sum()
        final = CircuitState(t[-1], x[:M], x[M:])
        if not final.is_finite():
            raise NonFiniteState("non-finite state in exact integration")
    else:
        grid = _switch_table(schedule, t)
        q, dq = state.q.copy(), state.dq.copy()
        args = (R, L, C, config.R_src, config.epsilon, config.w)
        with np.errstate(over="ignore", invalid="ignore"):
            q, dq = _rk4_loop(t, q, dq, grid, mid, current, dt, args, config)
        final = CircuitState(t[-1], q, dq)

    bits = (mid == 1.0).astype(np.int8)
    return Trajectory(t=t, current=current, bits=bits, state=final)


def _rk4_loop(t, q, dq, grid, mid, current, dt, args, config):
    for k in range(len(t) - 1):
        tk = t[k]
        S0, Sh, S1 = grid[k], mid[k], grid[k + 1]
        a1 = _accel(tk, q, dq, S0, *args)
        v1 = dq
        q2, dq2 = q + dt / 2 * v1, dq + dt / 2 * a1
        a2 = _accel(tk + dt / 2, q2, dq2, Sh, *args)
        q3, dq3 = q + dt / 2 * dq2, dq + dt / 2 * a2
        a3 = _accel(tk + dt / 2, q3, dq3, Sh, *args)
        q4, dq4 = q + dt * dq3, dq + dt * a3
        a4 = _accel(tk + dt, q4, dq4, S1, *args)
        q = q + dt / 6 * (v1 + 2 * dq2 + 2 * dq3 + dq4)
        dq = dq + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        s = q.sum() + dq.sum()
        if not math.isfinite(s):
            raise NonFiniteState(
                f"non-finite circuit state at t={float(tk + dt)!r} (step {k + 1}); RK4 stiffness "
                f"estimate |lambda| dt = {rk4_stiffness(config):.3g} vs stability limit "
                f"{RK4_STABILITY_LIMIT}; reduce dt or use integrator='exact'")
        current[k + 1] = dq.sum()
    return q, dq


def rms(x):
    """Root-mean-square of ``x``; exact for constant input."""
    x = np.asarray(x, dtype=float)
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak == 0.0:
        return 0.0
    return float(peak * math.sqrt(np.mean((x / peak) ** 2)))


@dataclass(frozen=True)
class SampledSeries:
    times: np.ndarray
    i_rms: np.ndarray
    switch_bits: np.ndarray
    i_max: float

    @property
    def M(self):
        return self.switch_bits.shape[1]

    def __len__(self):
        return len(self.times)

    def segment(self, start, stop):
        sl = slice(start, stop)
        part = self.i_rms[sl]
        return SampledSeries(self.times[sl], part, self.switch_bits[sl],
                             float(part.max()) if part.size else 0.0)


def rms_series(trajectory, config, start=0, n_samples=None):
    """Windowed RMS of the total current, one value every ``sample_stride`` steps.

    A window of ``rms_window`` seconds spans ``W`` steps and averages the ``W``
    current samples ending at its right edge. The first window begins after
    ``start`` steps. Switch bits are those in force over the last step of the
    window.
    """
    W = config.window_steps
    stride = int(config.sample_stride)
    n_total = len(trajectory.current) - 1
    first = start + W
    if first > n_total:
        raise ValueError(f"RMS window of {W} steps (after skipping {start}) is longer "
                         f"than the {n_total}-step trajectory")
    ends = np.arange(first, n_total + 1, stride)
    if n_samples is not None:
        if len(ends) < n_samples:
            raise ValueError(f"trajectory yields {len(ends)} samples, {n_samples} requested")
        ends = ends[:n_samples]
    windows = np.lib.stride_tricks.sliding_window_view(trajectory.current[1:], W)
    block = windows[ends - W]
    peak = np.max(np.abs(block), axis=1)
    safe = np.where(peak > 0, peak, 1.0)
    values = peak * np.sqrt(np.mean((block / safe[:, None]) ** 2, axis=1))
    bits = trajectory.bits[ends - 1].astype(np.int8)
    return SampledSeries(times=trajectory.t[ends].copy(), i_rms=values, switch_bits=bits,
                         i_max=float(values.max()) if values.size else 0.0)


def with_horizon(config, n_samples, discard=True):
    """Copy of ``config`` whose ``t_end`` produces exactly ``n_samples`` samples."""
    W = config.window_steps
    steps = horizon_steps(n_samples, W, config.sample_stride, W if discard else 0)
    return replace(config, t_end=steps * config.dt)
