"""Joint switch state <-> scalar regression target.

The M on/off bits are packed into one real number,

    s = (i_max / M) * sum_{k=1..M} 2**(k-1) * b_k,

so adjacent integer codes sit ``i_max / M`` apart and every joint state maps to
a distinct value whenever ``i_max > 0``.
"""

from dataclasses import dataclass

import numpy as np

ENCODING_NOTE = ("s = (i_max/M) * sum_{k=1..M} 2^(k-1) * b_k with b_k = 1 for a switch "
                 "at value 1 (on) and 0 for a switch at value K (off); i_max from the "
                 "training segment")

MAX_DECODE_LOADS = 24


@dataclass(frozen=True)
class EncodingParams:
    i_max: float
    M: int

    def __post_init__(self):
        if not self.i_max >= 0:
            raise ValueError(f"i_max must be >= 0, got {self.i_max!r}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be an integer >= 1, got {self.M!r}")

    @property
    def spacing(self):
        return self.i_max / self.M


def bit_from_switch(r, K):
    """1 for a closed switch (``r == 1``), 0 for standby (``r == K``)."""
    if r == 1:
        return 1
    if r == K:
        return 0
    raise ValueError(f"switch value {r!r} is neither 1 nor K={K!r}")


def _weights(M):
    return 2.0 ** np.arange(M)


def code_of(bits):
    """Integer code ``sum 2**(k-1) b_k`` of a bit vector or of each row of a bit matrix."""
    bits = np.asarray(bits)
    return (bits.astype(np.int64) << np.arange(bits.shape[-1])).sum(axis=-1)


def encode(bits, params):
    """Scalar target for one bit vector, or an array of targets for a bit matrix."""
    bits = np.asarray(bits)
    if bits.shape[-1] != params.M:
        raise ValueError(f"expected {params.M} bits, got {bits.shape[-1]}")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("switch bits must be 0 or 1")
    value = params.spacing * (bits @ _weights(params.M))
    return float(value) if bits.ndim == 1 else value


def nearest_code(s, params):
    """Integer code whose encoded value is closest to ``s``; ties go to the smaller code."""
    top = 2 ** params.M - 1
    s = np.asarray(s, dtype=float)
    if params.spacing == 0:
        return np.zeros(s.shape, dtype=np.int64)
    u = np.clip(s / params.spacing, 0, top)
    # Round half down: an exact tie between two codes resolves to the lower one.
    code = np.ceil(u - 0.5).astype(np.int64)
    return np.clip(code, 0, top)


def decode(s, params):
    """Bit vector (array of 0/1, length M) nearest to the scalar ``s``."""
    if params.M > MAX_DECODE_LOADS:
        raise ValueError(f"decode supports at most {MAX_DECODE_LOADS} loads")
    code = int(nearest_code(s, params))
    return ((code >> np.arange(params.M)) & 1).astype(np.int8)


def decode_many(values, params):
    """Row-wise :func:`decode` for an array of predicted targets."""
    codes = nearest_code(np.asarray(values, dtype=float), params)
    return ((codes[:, None] >> np.arange(params.M)) & 1).astype(np.int8)
