"""Gaussian-mixture source/target pairs related by an affine covariate shift."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .datasets import DomainDataset


@dataclass(frozen=True)
class SyntheticSpec:
    classes: int = 4
    dim: int = 16
    per_class: int = 500
    separation: float = 4.0
    cov_scale: float = 0.8
    translation: float = 6.0
    rotation_deg: float = 90.0
    scale: float = 1.3
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        values = (self.separation, self.cov_scale, self.translation, self.rotation_deg, self.scale)
        if not all(np.isfinite(v) for v in values):
            raise ConfigurationError("synthetic spec magnitudes must be finite")
        if self.classes < 2 or self.dim < 2 or self.per_class < 1:
            raise ConfigurationError("need classes >= 2, dim >= 2, per_class >= 1")
        if not 0.0 <= self.label_noise < 1.0:
            raise ConfigurationError(f"label_noise must lie in [0, 1), got {self.label_noise}")
        if self.cov_scale < 0 or self.scale <= 0:
            raise ConfigurationError("cov_scale must be >= 0 and scale > 0")


@dataclass
class ShiftedMixture:
    means: np.ndarray
    rotation: np.ndarray
    scale: float
    offset: np.ndarray

    def shift(self, X: np.ndarray) -> np.ndarray:
        return self.scale * (X @ self.rotation.T) + self.offset


def mixture_geometry(spec: SyntheticSpec, rng: np.random.Generator) -> ShiftedMixture:
    d = spec.dim
    directions = rng.standard_normal((spec.classes, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = spec.separation * directions

    # rotation by the given angle inside a random 2-plane, identity on its complement
    basis, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    u, v = basis[:, 0], basis[:, 1]
    theta = np.deg2rad(spec.rotation_deg)
    R = (
        np.eye(d)
        + (np.cos(theta) - 1.0) * (np.outer(u, u) + np.outer(v, v))
        + np.sin(theta) * (np.outer(v, u) - np.outer(u, v))
    )
    direction = rng.standard_normal(d)
    offset = spec.translation * direction / np.linalg.norm(direction)
    return ShiftedMixture(means, R, spec.scale, offset)


def _sample(spec, means, rng):
    labels = np.repeat(np.arange(spec.classes), spec.per_class)
    X = means[labels] + spec.cov_scale * rng.standard_normal((labels.size, spec.dim))
    order = rng.permutation(labels.size)
    return X[order], labels[order]


def generate_synthetic(spec: SyntheticSpec) -> tuple[DomainDataset, DomainDataset]:
    """Labeled source and shifted target; target labels are ground truth for evaluation only."""
    rng = np.random.default_rng(spec.seed)
    geo = mixture_geometry(spec, rng)
    Xs, ys = _sample(spec, geo.means, rng)
    Xt, yt = _sample(spec, geo.means, rng)
    Xt = geo.shift(Xt)
    if spec.label_noise > 0:
        flip = rng.random(ys.size) < spec.label_noise
        bump = rng.integers(1, spec.classes, size=ys.size)
        ys = np.where(flip, (ys + bump) % spec.classes, ys)
    source = DomainDataset(Xs, ys, "source", spec.classes)
    target = DomainDataset(Xt, yt, "target", spec.classes)
    return source, target
