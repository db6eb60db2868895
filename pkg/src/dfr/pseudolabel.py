"""Pseudo-label selection for the target domain.

A target sample is accepted when its top softmax probability exceeds the round
threshold and the nearest source class centre (L1 distance in logit space) is
the same class as the softmax argmax.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError
from .network import NetworkParams, backward, cross_entropy, forward, softmax


@dataclass
class ClassCenters:
    centers: np.ndarray  # (C, C): row c is the mean logit vector of source class c
    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.centers.shape[0]


@dataclass
class PseudoLabelSet:
    indices: np.ndarray
    labels: np.ndarray
    max_prob: np.ndarray
    nearest_center: np.ndarray
    threshold: float

    def __len__(self) -> int:
        return int(self.indices.size)

    def precision(self, true_labels) -> float:
        if len(self) == 0:
            return float("nan")
        return float(np.mean(np.asarray(true_labels)[self.indices] == self.labels))


@dataclass(frozen=True)
class RefinementSchedule:
    thresholds: tuple[float, ...] = (0.9, 0.6, 0.3)

    def __post_init__(self):
        p = self.thresholds
        if len(p) < 1:
            raise ConfigurationError("refinement schedule needs at least one threshold")
        if any(not 0.0 < x < 1.0 for x in p):
            raise ConfigurationError(f"thresholds must lie in (0, 1), got {p}")
        if any(a <= b for a, b in zip(p, p[1:])):
            raise ConfigurationError(f"thresholds must be strictly decreasing, got {p}")

    @property
    def T(self) -> int:
        return len(self.thresholds)


def compute_class_centers(source_logits, labels, C: int) -> ClassCenters:
    logits = np.asarray(source_logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.shape != (labels.size, C):
        raise ConfigurationError(f"logits shape {logits.shape} does not match {labels.size} labels x {C} classes")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise DataError(f"labels outside [0, {C})")
    counts = np.bincount(labels, minlength=C)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise DataError(f"class {empty[0]} has no source samples; its centre is undefined")
    sums = np.zeros((C, C))
    np.add.at(sums, labels, logits)
    return ClassCenters(sums / counts[:, None], counts)


def center_distances(logits, centers: ClassCenters) -> np.ndarray:
    """L1 distance from each logit row to each class centre, shape (n, C)."""
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    return np.abs(z[:, None, :] - centers.centers[None, :, :]).sum(axis=2)


def nearest_center(logits_row, centers: ClassCenters) -> tuple[int, np.ndarray]:
    dist = center_distances(logits_row, centers)[0]
    return int(np.argmin(dist)), dist


def select_pseudo_labels(target_logits, centers: ClassCenters, p_t: float) -> PseudoLabelSet:
    if not 0.0 < p_t < 1.0:
        raise ConfigurationError(f"threshold must lie in (0, 1), got {p_t}")
    z = np.asarray(target_logits, dtype=np.float64)
    probs = softmax(z)
    pred = np.argmax(probs, axis=1)
    top = probs[np.arange(len(z)), pred]
    near = np.argmin(center_distances(z, centers), axis=1)
    keep = np.flatnonzero((top > p_t) & (near == pred))
    return PseudoLabelSet(keep, pred[keep], top[keep], near[keep], float(p_t))


def target_loss(
    params: NetworkParams,
    selected: PseudoLabelSet,
    target_features,
    batch: int,
    mode: str = "train",
) -> tuple[float, dict[str, np.ndarray] | None] | None:
    """Cross-entropy of the network on pseudo-labelled target samples, batch by batch.

    Batches follow the selection order; a trailing batch of one row is folded
    into the previous batch because train-mode BatchNorm needs two. The loss is
    the mean over all selected samples and the gradient is the matching weighted
    sum of per-batch gradients. Eval mode returns the loss with ``None``
    gradients. An empty selection returns ``None`` so the caller can skip it.
    """
    if len(selected) == 0:
        return None
    X = np.asarray(target_features, dtype=np.float64)[selected.indices]
    y = selected.labels
    n = len(y)
    if mode == "eval":
        logits, _ = forward(params, X, "eval")
        loss, _ = cross_entropy(logits, y)
        return loss, None
    if n < 2:
        raise ConfigurationError("train-mode target loss needs at least 2 selected samples")
    if batch < 2:
        raise ConfigurationError(f"batch must be >= 2, got {batch}")
    starts = list(range(0, n, batch))
    if n - starts[-1] < 2:
        starts.pop()
    bounds = list(zip(starts, starts[1:] + [n]))
    total = 0.0
    grads = None
    for lo, hi in bounds:
        logits, cache = forward(params, X[lo:hi], "train", update_running=False)
        loss_b, dlog = cross_entropy(logits, y[lo:hi])
        weight = (hi - lo) / n
        total += weight * loss_b
        g, _ = backward(params, cache, dlog * weight)
        grads = g if grads is None else {k: grads[k] + g[k] for k in g}
    return total, grads
