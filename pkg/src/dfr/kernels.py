"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting ``DFR_PURE_PYTHON=1``
forces the numpy fallback. Both expose the same functions and produce the same
bits on the same inputs.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("DFR_PURE_PYTHON"):
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def available_backends() -> dict:
    out = {"python": _kernels_py}
    try:
        from . import _kernels_cy

        out["cython"] = _kernels_cy
    except ImportError:
        pass
    return out


def l1_registration(F, S, T, alpha):
    return _impl.l1_registration(F, S, T, alpha)


def register_adam(S, T, F0, alpha, lr, beta1, beta2, eps, steps, tol):
    return _impl.register_adam(S, T, F0, alpha, lr, beta1, beta2, eps, steps, tol)


def bin_positions(values, lo, hi, bins, smooth):
    return _impl.bin_positions(values, lo, hi, bins, smooth)


def soft_histogram(values, lo, hi, bins, smooth):
    return _impl.soft_histogram(values, lo, hi, bins, smooth)
