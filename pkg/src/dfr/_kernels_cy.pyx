# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in _kernels_py.py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, floor, pow

cnp.import_array()


cdef inline double _sign(double x) noexcept nogil:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


cdef double _l1(const double[::1] F, const double[::1] S, const double[::1] T,
                double alpha, double[::1] grad) noexcept nogil:
    cdef Py_ssize_t i, n = F.shape[0]
    cdef double ls = 0.0, lt = 0.0, ds, dt
    for i in range(n):
        ds = F[i] - S[i]
        dt = F[i] - T[i]
        ls += fabs(ds)
        lt += fabs(dt)
        grad[i] = _sign(ds) + alpha * _sign(dt)
    return ls + alpha * lt


def l1_registration(F, S, T, double alpha):
    F = np.ascontiguousarray(F, dtype=np.float64)
    shape = F.shape
    cdef double[::1] f = F.reshape(-1)
    cdef double[::1] s = np.ascontiguousarray(S, dtype=np.float64).reshape(-1)
    cdef double[::1] t = np.ascontiguousarray(T, dtype=np.float64).reshape(-1)
    grad = np.empty(f.shape[0], dtype=np.float64)
    cdef double[::1] g = grad
    cdef double loss
    with nogil:
        loss = _l1(f, s, t, alpha, g)
    return loss, grad.reshape(shape)


def register_adam(S, T, F0, double alpha, double lr, double beta1, double beta2,
                  double eps, Py_ssize_t steps, double tol):
    F_arr = np.array(F0, dtype=np.float64, copy=True, order="C")
    shape = F_arr.shape
    cdef double[::1] F = F_arr.reshape(-1)
    cdef double[::1] s = np.ascontiguousarray(S, dtype=np.float64).reshape(-1)
    cdef double[::1] t = np.ascontiguousarray(T, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = F.shape[0]
    m_arr = np.zeros(n)
    v_arr = np.zeros(n)
    g_arr = np.empty(n)
    best_arr = F_arr.reshape(-1).copy()
    hist_arr = np.empty(steps + 1)
    cdef double[::1] m = m_arr
    cdef double[::1] v = v_arr
    cdef double[::1] g = g_arr
    cdef double[::1] best = best_arr
    cdef double[::1] hist = hist_arr
    cdef double loss, new_loss, best_loss, bc1, bc2, step_size, gi
    cdef Py_ssize_t i, k, used = 0
    with nogil:
        loss = _l1(F, s, t, alpha, g)
        hist[0] = loss
        best_loss = loss
        for k in range(1, steps + 1):
            bc1 = 1.0 - pow(beta1, <double>k)
            bc2 = 1.0 - pow(beta2, <double>k)
            step_size = lr / bc1
            for i in range(n):
                gi = g[i]
                m[i] = m[i] * beta1 + (1.0 - beta1) * gi
                v[i] = v[i] * beta2 + (1.0 - beta2) * (gi * gi)
                F[i] = F[i] - step_size * m[i] / (sqrt(v[i] / bc2) + eps)
            new_loss = _l1(F, s, t, alpha, g)
            hist[k] = new_loss
            used = k
            if new_loss < best_loss:
                best_loss = new_loss
                for i in range(n):
                    best[i] = F[i]
            if fabs(loss - new_loss) < tol:
                break
            loss = new_loss
    return best_arr.reshape(shape), best_loss, hist_arr[: used + 1].copy(), used


def bin_positions(values, double lo, double hi, Py_ssize_t bins, bint smooth):
    cdef double[::1] x = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = x.shape[0], i, k
    idx_arr = np.empty(n, dtype=np.intp)
    frac_arr = np.empty(n)
    slope_arr = np.empty(n)
    cdef Py_ssize_t[::1] idx = idx_arr
    cdef double[::1] frac = frac_arr
    cdef double[::1] slope = slope_arr
    cdef double width = (hi - lo) / bins, u, top = <double>(bins - 1)
    with nogil:
        for i in range(n):
            if smooth:
                u = (x[i] - lo) / width - 0.5
                if u <= 0.0:
                    idx[i] = 0
                    frac[i] = 0.0
                    slope[i] = 0.0
                elif u >= top:
                    idx[i] = bins - 2
                    frac[i] = 1.0
                    slope[i] = 0.0
                else:
                    k = <Py_ssize_t>floor(u)
                    if k > bins - 2:
                        k = bins - 2
                    idx[i] = k
                    frac[i] = u - k
                    slope[i] = 1.0 / width
            else:
                k = <Py_ssize_t>floor((x[i] - lo) / width)
                if k < 0:
                    k = 0
                if k >= bins - 1:
                    idx[i] = bins - 2
                    frac[i] = 1.0
                else:
                    idx[i] = k
                    frac[i] = 0.0
                slope[i] = 0.0
    return idx_arr, frac_arr, slope_arr


def soft_histogram(values, double lo, double hi, Py_ssize_t bins, bint smooth):
    idx_arr, frac_arr, slope_arr = bin_positions(values, lo, hi, bins, smooth)
    masses_arr = np.zeros(bins)
    lower_arr = np.zeros(bins)
    upper_arr = np.zeros(bins)
    cdef Py_ssize_t[::1] idx = idx_arr
    cdef double[::1] frac = frac_arr
    cdef double[::1] lower = lower_arr
    cdef double[::1] upper = upper_arr
    cdef Py_ssize_t i, n = idx.shape[0]
    # two accumulators keep the summation order identical to the numpy bincount pair
    with nogil:
        for i in range(n):
            lower[idx[i]] += 1.0 - frac[i]
            upper[idx[i] + 1] += frac[i]
    masses_arr = lower_arr + upper_arr
    return masses_arr, idx_arr, frac_arr, slope_arr
