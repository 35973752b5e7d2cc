"""Chaotic on/off switching from a binarized logistic-map orbit."""

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DEFAULT_SEED = 0.123456789
DEFAULT_K = 1e5

# Seeds whose orbit lands on a fixed point (0 or 3/4) within two iterations.
DEGENERATE_SEEDS = (0.0, 0.25, 0.5, 0.75, 1.0)
_FIXED_POINTS = (0.0, 0.75)


class ScheduleExhausted(IndexError):
    """Raised when a switch time needs an index past the generated sequence."""


def logistic_step(x):
    """One iteration of the fully chaotic logistic map, ``4 x (1 - x)``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"logistic map state must lie in [0, 1], got {x!r}")
    return 4.0 * x * (1.0 - x)


def binarize(x, K=DEFAULT_K):
    """Return ``K`` (switch off) when ``x <= 1/2`` and ``1`` (switch on) otherwise."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"logistic map state must lie in [0, 1], got {x!r}")
    if not K > 1.0:
        raise ValueError(f"standby constant K must exceed 1, got {K!r}")
    return float(K) if x <= 0.5 else 1.0


def generate_sequence(seed=DEFAULT_SEED, length=1, K=DEFAULT_K):
    """Binarized logistic orbit ``r_0, ..., r_{length-1}`` starting at ``x_0 = seed``.

    Every element is exactly ``K`` or exactly ``1.0``. Iteration is done in
    float64, so sequences are reproducible bit-for-bit on IEEE-754 hardware.
    """
    seed = float(seed)
    if not 0.0 < seed < 1.0 or seed in DEGENERATE_SEEDS:
        raise ValueError(
            f"seed {seed!r} is outside (0, 1) or collapses onto a fixed point; "
            f"rejected seeds: {DEGENERATE_SEEDS}")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length!r}")
    if not K > 1.0:
        raise ValueError(f"standby constant K must exceed 1, got {K!r}")

    out = np.empty(int(length))
    x = seed
    near_fixed = False
    for n in range(int(length)):
        out[n] = K if x <= 0.5 else 1.0
        if not near_fixed and any(abs(x - fp) < 1e-12 for fp in _FIXED_POINTS):
            near_fixed = True
        x = 4.0 * x * (1.0 - x)
    if near_fixed:
        warnings.warn(f"logistic orbit from seed {seed!r} came within 1e-12 of a "
                      "fixed point; the switching may stop being chaotic",
                      RuntimeWarning, stacklevel=2)
    return out


@dataclass(frozen=True)
class SwitchSchedule:
    """Shared binary sequence read by every load at its own dilation ``tau``.

    ``per_load`` optionally replaces the shared sequence with one sequence per
    load; it is ``None`` for the default shared-orbit construction.
    """

    sequence: np.ndarray
    taus: tuple
    K: float = DEFAULT_K
    per_load: Optional[tuple] = None

    def __post_init__(self):
        taus = tuple(float(t) for t in self.taus)
        if not taus or any(not t > 0 for t in taus):
            raise ValueError(f"every tau must be > 0, got {taus}")
        object.__setattr__(self, "taus", taus)
        if self.per_load is not None and len(self.per_load) != len(taus):
            raise ValueError("per_load needs one sequence per load")

    @property
    def n_loads(self):
        return len(self.taus)

    def sequence_for(self, load_index):
        if self.per_load is not None:
            return self.per_load[load_index]
        return self.sequence


def switch_value(schedule, load_index, t):
    """Switch state ``S_j(t) = r[floor(t / tau_j)]`` of load ``load_index``."""
    if t < 0:
        raise ValueError(f"switch time must be >= 0, got {t!r}")
    if not 0 <= load_index < schedule.n_loads:
        raise IndexError(f"load index {load_index} out of range for "
                         f"{schedule.n_loads} loads")
    seq = schedule.sequence_for(load_index)
    n = math.floor(t / schedule.taus[load_index])
    if n >= len(seq):
        raise ScheduleExhausted(
            f"t={t!r} needs sequence index {n} but only {len(seq)} values were "
            f"generated for load {load_index}; generate a longer sequence")
    return float(seq[n])


def switch_values(schedule, t):
    """Vector of all M switch values at time ``t``."""
    return np.array([switch_value(schedule, j, t) for j in range(schedule.n_loads)])


def required_length(taus: Sequence[float], t_end: float) -> int:
    """Sequence length that covers ``[0, t_end]`` for the fastest-switching load."""
    return int(math.floor(t_end / min(taus))) + 2


def build_schedule(taus, t_end, seed=DEFAULT_SEED, K=DEFAULT_K, load_seeds=None):
    """Generate a schedule long enough to drive a simulation up to ``t_end``."""
    length = required_length(taus, t_end)
    if load_seeds is None:
        return SwitchSchedule(generate_sequence(seed, length, K), tuple(taus), K)
    if len(load_seeds) != len(taus):
        raise ValueError("load_seeds needs one seed per load")
    seqs = tuple(generate_sequence(s, length, K) for s in load_seeds)
    return SwitchSchedule(seqs[0], tuple(taus), K, per_load=seqs)
