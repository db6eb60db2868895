"""Feature registration: per batch pair, find features close (in L1) to both domains.

The objective for a source batch S and target batch T of the same shape is

    L_R(F) = sum |F - S| + alpha * sum |F - T|

minimized by Adam from F = T - S. The minimizer separates per element: it is the
source value when alpha < 1 and the target value when alpha > 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .numerics import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, as_matrix, check_same_shape

INIT_POLICIES = ("difference", "source", "midpoint")


@dataclass(frozen=True)
class RegistrationConfig:
    alpha: float = 0.6
    inner_steps: int = 200
    inner_lr: float = 0.1
    tolerance: float = 1e-6
    init: str = "difference"
    snap: bool = True

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if self.inner_steps < 1:
            raise ConfigurationError(f"inner_steps must be >= 1, got {self.inner_steps}")
        if self.inner_lr <= 0:
            raise ConfigurationError(f"inner_lr must be > 0, got {self.inner_lr}")
        if self.tolerance < 0:
            raise ConfigurationError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.init not in INIT_POLICIES:
            raise ConfigurationError(f"init must be one of {INIT_POLICIES}, got {self.init!r}")


@dataclass
class RegistrationResult:
    registered: np.ndarray
    final_loss: float
    loss_history: np.ndarray
    steps_used: int


def registration_loss(F, S, T, alpha: float) -> tuple[float, np.ndarray]:
    """Hybrid L1 loss and its subgradient (sign(0) taken as 0)."""
    F, S, T = as_matrix(F, "F"), as_matrix(S, "source batch"), as_matrix(T, "target batch")
    check_same_shape(("F", F), ("source batch", S), ("target batch", T))
    return kernels.l1_registration(F, S, T, float(alpha))


def initial_features(S: np.ndarray, T: np.ndarray, init: str = "difference") -> np.ndarray:
    if init == "difference":
        return T - S
    if init == "source":
        return S.copy()
    return 0.5 * (S + T)


def register_features(S, T, cfg: RegistrationConfig | None = None) -> RegistrationResult:
    """Registered features for one source/target batch pair.

    Returns the lowest-loss iterate seen, so ``final_loss`` never exceeds the loss
    at initialization even when Adam overshoots the L1 kinks. With ``snap`` the
    iterate is then polished by ``snap_to_kinks`` within a radius of ``inner_lr``.
    """
    cfg = cfg or RegistrationConfig()
    S, T = as_matrix(S, "source batch"), as_matrix(T, "target batch")
    check_same_shape(("source batch", S), ("target batch", T))
    F0 = initial_features(S, T, cfg.init)
    best, best_loss, history, used = kernels.register_adam(
        S, T, F0, float(cfg.alpha), float(cfg.inner_lr),
        ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, int(cfg.inner_steps), float(cfg.tolerance),
    )
    if cfg.snap:
        best = snap_to_kinks(best, S, T, cfg.alpha, cfg.inner_lr)
        snapped_loss, _ = kernels.l1_registration(best, S, T, float(cfg.alpha))
        best_loss = min(best_loss, snapped_loss)
    return RegistrationResult(best, float(best_loss), history, int(used))


def snap_to_kinks(F, S, T, alpha: float, radius: float) -> np.ndarray:
    """Move elements onto a nearby kink (their s or t value) when that lowers their cost.

    Adam with a fixed step settles into a limit cycle of width O(lr) around an L1
    kink instead of landing on it. The objective is separable, so replacing each
    element by the cheapest of {x, s, t} restricted to the radius never raises it.
    """
    cost = lambda x: np.abs(x - S) + alpha * np.abs(x - T)
    out = F.copy()
    best = cost(out)
    for kink in (S, T):
        c = cost(kink)
        take = (np.abs(F - kink) <= radius) & (c < best)
        out = np.where(take, kink, out)
        best = np.where(take, c, best)
    return out


def elementwise_minimizer(s, t, alpha):
    """Closed-form minimizer of |x - s| + alpha |x - t| (any point of [s, t] when alpha == 1; s returned)."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    return np.where(np.asarray(alpha) > 1.0, t, s)
