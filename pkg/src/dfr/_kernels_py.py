"""Pure-numpy kernels. ``_kernels_cy.pyx`` mirrors these signatures exactly."""
import numpy as np


def l1_registration(F, S, T, alpha):
    dS = F - S
    dT = F - T
    # cumsum is a sequential sum, matching the compiled loop bit for bit
    loss = float(np.cumsum(np.abs(dS).ravel())[-1]) + alpha * float(np.cumsum(np.abs(dT).ravel())[-1])
    grad = np.sign(dS) + alpha * np.sign(dT)
    return loss, grad


def register_adam(S, T, F0, alpha, lr, beta1, beta2, eps, steps, tol):
    """Adam on the hybrid L1 registration loss starting from ``F0``.

    Returns (best iterate, its loss, loss history, steps taken). Stops early when
    the absolute loss change between consecutive iterates drops below ``tol``.
    """
    F = np.array(F0, dtype=np.float64, copy=True)
    m = np.zeros_like(F)
    v = np.zeros_like(F)
    loss, g = l1_registration(F, S, T, alpha)
    history = [loss]
    best = F.copy()
    best_loss = loss
    used = 0
    for k in range(1, steps + 1):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        bc1 = 1.0 - beta1**k
        bc2 = 1.0 - beta2**k
        F -= (lr / bc1) * m / (np.sqrt(v / bc2) + eps)
        new_loss, g = l1_registration(F, S, T, alpha)
        history.append(new_loss)
        used = k
        if new_loss < best_loss:
            best_loss = new_loss
            best[...] = F
        if abs(loss - new_loss) < tol:
            break
        loss = new_loss
    return best, best_loss, np.asarray(history), used


def bin_positions(values, lo, hi, bins, smooth):
    """Lower bin index, upper-bin weight and d(weight)/d(value) for each value.

    Every value puts ``1 - frac`` mass on bin ``idx`` and ``frac`` on ``idx + 1``.
    Smooth mode interpolates linearly between bin centres; hard mode assigns the
    whole unit to the containing bin (``frac`` is then 0 or 1 and ``slope`` is 0).
    """
    values = np.asarray(values, dtype=np.float64)
    width = (hi - lo) / bins
    if smooth:
        u = (values - lo) / width - 0.5
        inside = (u > 0.0) & (u < bins - 1)
        u = np.clip(u, 0.0, bins - 1)
        k = np.minimum(np.floor(u).astype(np.intp), bins - 2)
        frac = u - k
        slope = np.where(inside, 1.0 / width, 0.0)
    else:
        k = np.floor((values - lo) / width).astype(np.intp)
        k = np.clip(k, 0, bins - 1)
        top = k == bins - 1
        frac = np.where(top, 1.0, 0.0)
        k = np.where(top, bins - 2, k)
        slope = np.zeros_like(values)
    return k, frac, slope


def soft_histogram(values, lo, hi, bins, smooth):
    idx, frac, slope = bin_positions(values, lo, hi, bins, smooth)
    masses = np.bincount(idx, weights=1.0 - frac, minlength=bins)
    masses += np.bincount(idx + 1, weights=frac, minlength=bins)
    return masses, idx, frac, slope
