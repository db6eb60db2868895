"""Differentiable histograms, the histogram matching loss, and MMD/CORAL readouts.

Smooth binning uses a triangular kernel on bin centres: a value between centres
k and k+1 splits its unit mass linearly between them, and values beyond the
outermost centres go entirely to the boundary bin. Gradients flow through the
interpolation weights; the histogram range is treated as a constant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import ConfigurationError, DataError


@dataclass(frozen=True)
class HistogramConfig:
    bins: int = 10
    range_policy: str = "batch"  # "batch": union min/max of the inputs; "fixed": [lo, hi]
    lo: float | None = None
    hi: float | None = None
    smooth: bool = True

    def __post_init__(self):
        if self.bins < 2:
            raise ConfigurationError(f"need at least 2 bins, got {self.bins}")
        if self.range_policy not in ("batch", "fixed"):
            raise ConfigurationError(f"unknown range policy {self.range_policy!r}")
        if self.range_policy == "fixed":
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ConfigurationError(f"fixed range needs lo < hi, got lo={self.lo}, hi={self.hi}")


@dataclass
class Histogram:
    masses: np.ndarray
    bin_edges: np.ndarray


def _flat(values, name) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise DataError(f"{name}: empty input")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{name}: non-finite values")
    return v


def value_range(cfg: HistogramConfig, *arrays: np.ndarray) -> tuple[float, float]:
    if cfg.range_policy == "fixed":
        return float(cfg.lo), float(cfg.hi)
    lo = min(float(a.min()) for a in arrays)
    hi = max(float(a.max()) for a in arrays)
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def soft_histogram(
    values, cfg: HistogramConfig, value_range_override: tuple[float, float] | None = None
) -> tuple[Histogram, Callable[[np.ndarray], np.ndarray]]:
    """Histogram of ``values`` and its vector-Jacobian product.

    The returned callable maps an upstream gradient over the bin masses to the
    gradient over ``values`` (same shape as the input).
    """
    shape = np.shape(values)
    v = _flat(values, "values")
    lo, hi = value_range_override or value_range(cfg, v)
    masses, idx, frac, slope = kernels.soft_histogram(v, lo, hi, cfg.bins, cfg.smooth)
    edges = np.linspace(lo, hi, cfg.bins + 1)

    def vjp(dmasses):
        dmasses = np.asarray(dmasses, dtype=np.float64)
        return ((dmasses[idx + 1] - dmasses[idx]) * slope).reshape(shape)

    return Histogram(masses, edges), vjp


def histogram_loss(out_reg, out_tgt, cfg: HistogramConfig | None = None) -> tuple[float, np.ndarray, np.ndarray]:
    """Sum over bins of |p_reg - p_tgt| for unit-mass histograms of the two inputs.

    Both inputs are flattened and binned over one shared range. Returns the loss
    and its gradients with respect to each input.
    """
    cfg = cfg or HistogramConfig()
    a = _flat(out_reg, "registered outputs")
    b = _flat(out_tgt, "target outputs")
    rng = value_range(cfg, a, b)
    hist_a, vjp_a = soft_histogram(out_reg, cfg, rng)
    hist_b, vjp_b = soft_histogram(out_tgt, cfg, rng)
    p = hist_a.masses / a.size
    q = hist_b.masses / b.size
    diff = p - q
    loss = float(np.abs(diff).sum())
    s = np.sign(diff)
    return loss, vjp_a(s / a.size), vjp_b(-s / b.size)


def _sq_dists(A, B):
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d, 0.0)


def median_bandwidth(A, B) -> float:
    """Median heuristic: sqrt(median pairwise squared distance / 2) over the pooled sample."""
    Z = np.vstack([A, B])
    d = _sq_dists(Z, Z)
    med = float(np.median(d[np.triu_indices(len(Z), k=1)])) if len(Z) > 1 else 0.0
    return float(np.sqrt(med / 2.0)) if med > 0 else 1.0


def mmd_value(A, B, bandwidth: float) -> float:
    """Biased squared MMD with kernel exp(-|x - y|^2 / (2 bandwidth^2))."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ConfigurationError(f"width mismatch: {A.shape} vs {B.shape}")
    if len(A) == 0 or len(B) == 0:
        raise DataError("mmd needs nonempty samples")
    if bandwidth <= 0:
        raise ConfigurationError(f"bandwidth must be positive, got {bandwidth}")
    if np.isinf(bandwidth):
        return 0.0
    scale = 1.0 / (2.0 * bandwidth * bandwidth)
    kaa = np.exp(-scale * _sq_dists(A, A)).mean()
    kbb = np.exp(-scale * _sq_dists(B, B)).mean()
    kab = np.exp(-scale * _sq_dists(A, B)).mean()
    return float(kaa + kbb - 2.0 * kab)


def coral_value(A, B) -> float:
    """Squared Frobenius distance of sample covariances, divided by 4 d^2."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ConfigurationError(f"width mismatch: {np.shape(A)} vs {np.shape(B)}")
    if len(A) < 2 or len(B) < 2:
        raise DataError("coral needs at least 2 rows per sample")
    d = A.shape[1]

    def cov(X):
        Xc = X - X.mean(axis=0)
        return Xc.T @ Xc / (len(X) - 1)

    diff = cov(A) - cov(B)
    return float((diff * diff).sum() / (4.0 * d * d))
