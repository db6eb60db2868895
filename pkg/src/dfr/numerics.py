"""Dense-matrix helpers, the Adam update and a central-difference gradient oracle.

Feature matrices are plain ``float64`` numpy arrays of shape ``(rows, cols)``;
``as_matrix`` is the single validation point for anything entering the library.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, NumericError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Return ``x`` as a C-contiguous 2-D float64 array, rejecting NaN/Inf."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ConfigurationError(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name}: contains non-finite values")
    return arr


def check_same_shape(*named: tuple[str, np.ndarray]) -> None:
    first_name, first = named[0]
    for name, arr in named[1:]:
        if arr.shape != first.shape:
            raise ConfigurationError(
                f"shape mismatch: {first_name}{first.shape} vs {name}{arr.shape}"
            )


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def zeros_like(cls, param: np.ndarray, **kwargs) -> "AdamState":
        return cls(np.zeros_like(param, dtype=np.float64), np.zeros_like(param, dtype=np.float64), **kwargs)


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    name: str = "param",
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns new arrays; inputs are not mutated."""
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if lr <= 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    if not (param.shape == grad.shape == state.first_moment.shape == state.second_moment.shape):
        raise ConfigurationError(
            f"{name}: shape mismatch param{param.shape} grad{grad.shape} "
            f"moments{state.first_moment.shape}/{state.second_moment.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"{name}: non-finite gradient")

    b1, b2 = state.beta1, state.beta2
    t = state.step_count + 1
    m = b1 * state.first_moment + (1.0 - b1) * grad
    v = b2 * state.second_moment + (1.0 - b2) * (grad * grad)
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_param = param - (lr / bc1) * m / (np.sqrt(v / bc2) + state.epsilon)
    new_state = AdamState(m, v, t, b1, b2, state.epsilon)
    return new_param, new_state


@dataclass
class Adam:
    """Adam over a dict of named parameter arrays, updating them in place."""

    lr: float = 1e-3
    states: dict[str, AdamState] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        # same arithmetic as adam_step, done in place; results are bit-identical
        for key, p in params.items():
            g = grads[key]
            if g.shape != p.shape:
                raise ConfigurationError(f"{key}: gradient shape {g.shape} != parameter shape {p.shape}")
            if not np.all(np.isfinite(g)):
                raise NumericError(f"{key}: non-finite gradient")
            state = self.states.get(key)
            if state is None:
                state = self.states[key] = AdamState.zeros_like(p)
            b1, b2 = state.beta1, state.beta2
            state.step_count += 1
            t = state.step_count
            m, v = state.first_moment, state.second_moment
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            bc1 = 1.0 - b1**t
            bc2 = 1.0 - b2**t
            p -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + state.epsilon)


def finite_diff_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x``, one element at a time."""
    if h <= 0:
        raise ConfigurationError(f"step h must be positive, got {h}")
    x = np.array(x, dtype=np.float64, copy=True)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value while differencing element {i}")
        g[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-wise |a-b| / max(|a|, |b|, 1e-8)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
