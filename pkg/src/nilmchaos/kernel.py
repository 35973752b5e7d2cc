"""In-advance delay vectors and Gaussian kernel-Adaline regression.

An in-advance vector at index ``j`` holds the RMS current at ``j`` followed by
its ``d - 1`` successors, ``(i_j, i_{j+1}, ..., i_{j+d-1})``. The switch state at
``j`` shapes the current that follows it, so the regression maps these windows
to the encoded joint state

    s_j ~ F(i_j) = sum_k w_k exp(-|i_j - i_k|^2 / (2 p^2)) + w_0.

Training is per-sample least mean squares on the expansion coefficients: each
visited sample ``j`` moves its own coefficient ``w_j`` and the bias ``w_0`` by
``eta`` times the current prediction error.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .encoding import ENCODING_NOTE, EncodingParams, encode

MODEL_FORMAT = "nilmchaos-kernel-adaline/1"


class TrainingDivergence(ArithmeticError):
    """Raised when the LMS error becomes NaN or infinite (learning rate too large)."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"kernel-Adaline diverged in epoch {epoch}: non-finite "
                                    "error signal; lower eta")


@dataclass(frozen=True)
class TrainingSet:
    """Advance vectors paired with the encoded switch state at their first index."""

    vectors: np.ndarray
    targets: np.ndarray
    indices: np.ndarray
    bits: np.ndarray
    params: EncodingParams

    def __len__(self):
        return len(self.targets)

    @property
    def d(self):
        return self.vectors.shape[1]


def advance_vectors(values, d):
    """All ``len(values) - d + 1`` in-advance windows of a 1-D series, as rows."""
    values = np.asarray(values, dtype=float)
    if d < 1:
        raise ValueError(f"embedding length d must be >= 1, got {d!r}")
    if len(values) < d:
        raise ValueError(f"series of length {len(values)} is shorter than d={d}")
    return np.lib.stride_tricks.sliding_window_view(values, d).copy()


def build_advance_vectors(series, d, segment=None, params=None):
    """Training pairs from ``series`` restricted to ``segment`` (a ``(start, stop)`` pair).

    No vector reaches past ``stop``. Targets use ``params``; by default they are
    scaled by the segment's own maximum current.
    """
    start, stop = (0, len(series)) if segment is None else segment
    if not 0 <= start <= stop <= len(series):
        raise ValueError(f"segment {segment!r} does not fit a series of length {len(series)}")
    part = series.segment(start, stop)
    if params is None:
        params = EncodingParams(part.i_max, series.M)
    X = advance_vectors(part.i_rms, d)
    n = len(X)
    bits = part.switch_bits[:n]
    return TrainingSet(vectors=X, targets=np.asarray(encode(bits, params), dtype=float),
                       indices=np.arange(start, start + n), bits=bits, params=params)


def gaussian_kernel(u, v, p):
    """``exp(-|u - v|^2 / (2 p^2))`` for two equal-length vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if not p > 0:
        raise ValueError(f"kernel width p must be > 0, got {p!r}")
    return math.exp(-float(np.sum((u - v) ** 2)) / (2.0 * p * p))


def kernel_matrix(A, B, p):
    """Gaussian kernel between every row of ``A`` and every row of ``B``."""
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * p * p))


def gram_matrix(X, p):
    return kernel_matrix(X, X, p)


def median_heuristic(X, n_sub=200, seed=0):
    """Median pairwise distance among up to ``n_sub`` randomly chosen rows of ``X``.

    Falls back to 1.0 when all chosen rows coincide.
    """
    X = np.asarray(X, dtype=float)
    rng = np.random.default_rng(seed)
    if len(X) > n_sub:
        X = X[np.sort(rng.choice(len(X), n_sub, replace=False))]
    if len(X) < 2:
        return 1.0
    p = float(np.median(pdist(X)))
    return p if p > 0 else 1.0


@dataclass
class TrainingTrace:
    epoch: np.ndarray
    train_mse: np.ndarray
    w0: np.ndarray
    w_r: np.ndarray
    monitor_index: int


@dataclass
class KernelModel:
    vectors: np.ndarray
    weights: np.ndarray
    w0: float
    p: float
    d: int
    i_max: float
    M: int
    eta: float = 0.05
    epochs: int = 0
    seed: int = 0
    monitor_index: int = 0
    encoding_note: str = ENCODING_NOTE
    trace: Optional[TrainingTrace] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.vectors):
            raise ValueError("one weight per stored vector is required")
        if not self.p > 0:
            raise ValueError(f"kernel width p must be > 0, got {self.p!r}")
        if self.d < 1 or self.vectors.shape[1] != self.d:
            raise ValueError(f"stored vectors have length {self.vectors.shape[1]}, d={self.d}")

    @property
    def encoding(self):
        return EncodingParams(self.i_max, self.M)

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "d": int(self.d),
            "p": float(self.p),
            "eta": float(self.eta),
            "epochs": int(self.epochs),
            "seed": int(self.seed),
            "monitor_index": int(self.monitor_index),
            "i_max": float(self.i_max),
            "M": int(self.M),
            "encoding_note": self.encoding_note,
            "w0": float(self.w0),
            "terms": [{"vector": [float(x) for x in v], "weight": float(w)}
                      for v, w in zip(self.vectors, self.weights)],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {doc.get('format')!r}")
        terms = doc["terms"]
        d = int(doc["d"])
        vectors = np.array([t["vector"] for t in terms], dtype=float).reshape(len(terms), d)
        return cls(vectors=vectors, weights=np.array([t["weight"] for t in terms], dtype=float),
                   w0=float(doc["w0"]), p=float(doc["p"]), d=d, i_max=float(doc["i_max"]),
                   M=int(doc["M"]), eta=float(doc["eta"]), epochs=int(doc["epochs"]),
                   seed=int(doc["seed"]), monitor_index=int(doc["monitor_index"]),
                   encoding_note=doc["encoding_note"])


def save_model(model, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return KernelModel.from_dict(json.load(fh))


def train_kernel_adaline(data, p, eta=0.05, epochs=300, seed=0, shuffle=False):
    """Fit the kernel expansion to ``data`` by cyclic per-sample LMS.

    Parameters
    ----------
    data : TrainingSet
    p : float or "auto"
        Kernel width; ``"auto"`` applies :func:`median_heuristic` with ``seed``.
    eta : float
        Learning rate shared by the coefficients and the bias.
    epochs : int
        Passes over the training set.
    seed : int
        Picks the monitored coefficient ``w_r`` and, with ``shuffle``, the visit order.
    shuffle : bool
        Visit samples in a fresh seeded permutation each epoch instead of index order.

    Returns
    -------
    KernelModel
        With ``model.trace`` holding the per-epoch training MSE, ``w_0`` and ``w_r``.
    """
    N = len(data)
    if N == 0:
        raise ValueError("training set is empty")
    if not eta > 0:
        raise ValueError(f"eta must be > 0, got {eta!r}")
    if int(epochs) != epochs or epochs < 1:
        raise ValueError(f"epochs must be an integer >= 1, got {epochs!r}")
    if isinstance(p, str):
        if p != "auto":
            raise ValueError(f"p must be a positive number or 'auto', got {p!r}")
        p = median_heuristic(data.vectors, seed=seed)
    if not p > 0:
        raise ValueError(f"kernel width p must be > 0, got {p!r}")

    rng = np.random.default_rng(seed)
    r = int(rng.integers(N))
    G = gram_matrix(data.vectors, p)
    y = data.targets
    w = np.zeros(N)
    order = np.arange(N)
    trace_mse = np.empty(epochs)
    trace_w0 = np.empty(epochs)
    trace_wr = np.empty(epochs)

    with np.errstate(over="ignore", invalid="ignore"):
        _lms_epochs(G, y, w, order, eta, epochs, shuffle, rng, r,
                    trace_mse, trace_w0, trace_wr)
    w0 = float(trace_w0[-1])

    model = KernelModel(vectors=data.vectors.copy(), weights=w, w0=w0, p=float(p), d=data.d,
                        i_max=data.params.i_max, M=data.params.M, eta=float(eta),
                        epochs=int(epochs), seed=int(seed), monitor_index=r)
    model.trace = TrainingTrace(np.arange(1, epochs + 1), trace_mse, trace_w0, trace_wr, r)
    return model


def _lms_epochs(G, y, w, order, eta, epochs, shuffle, rng, r, trace_mse, trace_w0, trace_wr):
    w0 = 0.0
    for epoch in range(epochs):
        if shuffle:
            order = rng.permutation(len(y))
        for j in order:
            e = y[j] - (G[j] @ w + w0)
            if not math.isfinite(e):
                raise TrainingDivergence(epoch + 1)
            w[j] += eta * e
            w0 += eta * e
        err = y - (G @ w + w0)
        trace_mse[epoch] = float(np.mean(err * err))
        if not math.isfinite(trace_mse[epoch]):
            raise TrainingDivergence(epoch + 1)
        trace_w0[epoch] = w0
        trace_wr[epoch] = w[r]


def predict_many(model, X):
    """Kernel expansion evaluated at each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.d:
        raise ValueError(f"input vectors have length {X.shape[1]}, model expects d={model.d}")
    return kernel_matrix(X, model.vectors, model.p) @ model.weights + model.w0


def predict(model, vector):
    """Predicted encoded switch state for one advance vector."""
    vector = np.asarray(vector, dtype=float)
    if vector.ndim != 1 or vector.size != model.d:
        raise ValueError(f"input vector has shape {vector.shape}, model expects d={model.d}")
    return float(predict_many(model, vector[None, :])[0])


def mse(pred, truth):
    """Mean squared error between two equal-length, non-empty sequences."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("mse of empty input")
    diff = pred - truth
    return float(np.mean(diff * diff))
