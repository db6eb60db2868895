"""The detailed feature extractor: three dense layers, ReLU then BatchNorm after the first two.

    X -> Linear(d, 512) -> ReLU -> BN -> Linear(512, 256) -> ReLU -> BN -> Linear(256, C) -> logits

Forward and backward are hand-written; the backward pass differentiates through
the batch statistics of BatchNorm in train mode.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigurationError, DataError, StorageError
from .numerics import as_matrix

HIDDEN_WIDTHS = (512, 256)
BN_EPSILON = 1e-5
BN_MOMENTUM = 0.9  # running <- momentum * running + (1 - momentum) * batch

TRAINABLE = ("W1", "b1", "gamma1", "beta1", "W2", "b2", "gamma2", "beta2", "W3", "b3")
BUFFERS = ("running_mean1", "running_var1", "running_mean2", "running_var2")


@dataclass
class NetworkParams:
    W1: np.ndarray
    b1: np.ndarray
    gamma1: np.ndarray
    beta1: np.ndarray
    running_mean1: np.ndarray
    running_var1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    gamma2: np.ndarray
    beta2: np.ndarray
    running_mean2: np.ndarray
    running_var2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W3.shape[1]

    def trainable(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in TRAINABLE}

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "NetworkParams":
        return NetworkParams(**{k: v.copy() for k, v in self.arrays().items()})

    def equals(self, other: "NetworkParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays().values(), other.arrays().values()))


@dataclass
class ForwardCache:
    mode: str
    x: np.ndarray
    z1: np.ndarray
    xhat1: np.ndarray
    inv_std1: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    xhat2: np.ndarray
    inv_std2: np.ndarray
    h2: np.ndarray
    logits: np.ndarray
    batch_stats: dict = field(default_factory=dict)

    @property
    def embedding(self) -> np.ndarray:
        """Output of the second block, the 256-wide input to the final layer."""
        return self.h2


def init_params(d: int, C: int, seed: int = 0) -> NetworkParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, identity BatchNorm."""
    if d < 1 or C < 2:
        raise ConfigurationError(f"need d >= 1 and C >= 2, got d={d}, C={C}")
    rng = np.random.default_rng(seed)
    widths = (d, *HIDDEN_WIDTHS, C)

    def dense(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)

    W1, b1 = dense(widths[0], widths[1])
    W2, b2 = dense(widths[1], widths[2])
    W3, b3 = dense(widths[2], widths[3])
    h1, h2 = HIDDEN_WIDTHS
    return NetworkParams(
        W1=W1, b1=b1, gamma1=np.ones(h1), beta1=np.zeros(h1),
        running_mean1=np.zeros(h1), running_var1=np.ones(h1),
        W2=W2, b2=b2, gamma2=np.ones(h2), beta2=np.zeros(h2),
        running_mean2=np.zeros(h2), running_var2=np.ones(h2),
        W3=W3, b3=b3,
    )


def _batchnorm(a, gamma, beta, running_mean, running_var, train, update_running):
    if train:
        n = a.shape[0]
        mean = a.mean(axis=0)
        var = a.var(axis=0)
        if update_running:
            # running variance tracks the unbiased batch estimate
            running_mean *= BN_MOMENTUM
            running_mean += (1.0 - BN_MOMENTUM) * mean
            running_var *= BN_MOMENTUM
            running_var += (1.0 - BN_MOMENTUM) * var * (n / (n - 1))
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
    xhat = (a - mean) * inv_std
    return gamma * xhat + beta, xhat, inv_std, mean, var


def forward(
    params: NetworkParams, X, mode: str = "eval", update_running: bool = True
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a batch.

    Train mode normalizes with batch statistics and, unless ``update_running`` is
    False, folds them into the running statistics of ``params`` in place. Eval mode
    uses the running statistics and leaves ``params`` untouched.
    """
    if mode not in ("train", "eval"):
        raise ConfigurationError(f"mode must be 'train' or 'eval', got {mode!r}")
    X = as_matrix(X, "input batch")
    if X.shape[1] != params.input_dim:
        raise ConfigurationError(f"input width {X.shape[1]} != network input width {params.input_dim}")
    train = mode == "train"
    if train and X.shape[0] < 2:
        raise ConfigurationError("train-mode forward needs a batch of at least 2 rows")

    z1 = X @ params.W1 + params.b1
    a1 = np.maximum(z1, 0.0)
    h1, xhat1, inv1, m1, v1 = _batchnorm(
        a1, params.gamma1, params.beta1, params.running_mean1, params.running_var1, train, update_running
    )
    z2 = h1 @ params.W2 + params.b2
    a2 = np.maximum(z2, 0.0)
    h2, xhat2, inv2, m2, v2 = _batchnorm(
        a2, params.gamma2, params.beta2, params.running_mean2, params.running_var2, train, update_running
    )
    logits = h2 @ params.W3 + params.b3
    cache = ForwardCache(
        mode, X, z1, xhat1, inv1, h1, z2, xhat2, inv2, h2, logits,
        batch_stats={"mean1": m1, "var1": v1, "mean2": m2, "var2": v2},
    )
    return logits, cache


def _batchnorm_backward(dout, xhat, inv_std, gamma):
    n = dout.shape[0]
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    da = (inv_std / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return da, dgamma, dbeta


def backward(
    params: NetworkParams, cache: ForwardCache, dlogits, dembedding=None
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Reverse pass. Returns (parameter gradients keyed like ``TRAINABLE``, input gradient).

    ``dembedding`` adds an upstream gradient at the second block's output, for
    losses defined on the 256-wide embedding rather than the logits.
    """
    if cache.mode != "train":
        raise ConfigurationError("backward needs a cache from a train-mode forward")
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != cache.logits.shape:
        raise ConfigurationError(f"dlogits shape {dlogits.shape} != logits shape {cache.logits.shape}")

    g = {}
    g["W3"] = cache.h2.T @ dlogits
    g["b3"] = dlogits.sum(axis=0)
    dh2 = dlogits @ params.W3.T
    if dembedding is not None:
        dh2 = dh2 + dembedding
    da2, g["gamma2"], g["beta2"] = _batchnorm_backward(dh2, cache.xhat2, cache.inv_std2, params.gamma2)
    dz2 = da2 * (cache.z2 > 0)
    g["W2"] = cache.h1.T @ dz2
    g["b2"] = dz2.sum(axis=0)
    dh1 = dz2 @ params.W2.T
    da1, g["gamma1"], g["beta1"] = _batchnorm_backward(dh1, cache.xhat1, cache.inv_std1, params.gamma1)
    dz1 = da1 * (cache.z1 > 0)
    g["W1"] = cache.x.T @ dz1
    g["b1"] = dz1.sum(axis=0)
    dx = dz1 @ params.W1.T
    return {k: g[k] for k in TRAINABLE}, dx


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient with respect to the logits."""
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, C = z.shape
    if labels.shape != (n,):
        raise DataError(f"expected {n} labels, got shape {labels.shape}")
    bad = np.flatnonzero((labels < 0) | (labels >= C))
    if bad.size:
        raise DataError(f"label {labels[bad[0]]} at row {bad[0]} outside [0, {C})")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    sums = e.sum(axis=1)
    rows = np.arange(n)
    loss = float(np.mean(np.log(sums) - shifted[rows, labels]))
    grad = e / sums[:, None]
    grad[rows, labels] -= 1.0
    return loss, grad / n


def predict(params: NetworkParams, X) -> np.ndarray:
    logits, _ = forward(params, X, "eval")
    return np.argmax(logits, axis=1)


# Checkpoint layout (little-endian):
#   8 bytes  magic  b"DFRCKPT\0"
#   uint32   format version (1)
#   uint32   d, uint32 C, uint32 hidden1, uint32 hidden2
#   float64 arrays in CHECKPOINT_ORDER, each C-order, shapes implied by the header
CHECKPOINT_MAGIC = b"DFRCKPT\0"
CHECKPOINT_VERSION = 1
CHECKPOINT_ORDER = (
    "W1", "b1", "gamma1", "beta1", "running_mean1", "running_var1",
    "W2", "b2", "gamma2", "beta2", "running_mean2", "running_var2",
    "W3", "b3",
)


def _checkpoint_shapes(d, C, h1, h2):
    return {
        "W1": (d, h1), "b1": (h1,), "gamma1": (h1,), "beta1": (h1,),
        "running_mean1": (h1,), "running_var1": (h1,),
        "W2": (h1, h2), "b2": (h2,), "gamma2": (h2,), "beta2": (h2,),
        "running_mean2": (h2,), "running_var2": (h2,),
        "W3": (h2, C), "b3": (C,),
    }


def save_checkpoint(params: NetworkParams, path) -> None:
    h1, h2 = params.W1.shape[1], params.W2.shape[1]
    header = CHECKPOINT_MAGIC + struct.pack("<5I", CHECKPOINT_VERSION, params.input_dim, params.n_classes, h1, h2)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for name in CHECKPOINT_ORDER:
                fh.write(np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes())
    except OSError as exc:
        raise StorageError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> NetworkParams:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read checkpoint {path}: {exc}") from exc
    if blob[:8] != CHECKPOINT_MAGIC or len(blob) < 28:
        raise DataError(f"{path}: not a DFR checkpoint")
    version, d, C, h1, h2 = struct.unpack("<5I", blob[8:28])
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    shapes = _checkpoint_shapes(d, C, h1, h2)
    expected = 28 + 8 * sum(int(np.prod(s)) for s in shapes.values())
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(blob)}")
    offset = 28
    arrays = {}
    for name in CHECKPOINT_ORDER:
        count = int(np.prod(shapes[name]))
        arrays[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shapes[name])
        offset += 8 * count
    return NetworkParams(**arrays)
