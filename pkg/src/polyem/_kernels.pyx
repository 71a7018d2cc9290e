# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled time-stepping kernels for the catalog problems.

The sequential one-step recursion dominates runtime (the multiscale
sawtooth series is evaluated at every step of the reference solve), so the
inner loops live here.  A pure-python fallback with identical semantics is
selected at import time when this module is unavailable.
"""

import numpy as np

from libc.math cimport floor, tanh, fabs, pow


cdef inline double _g(double x, const double[::1] a, Py_ssize_t K) noexcept nogil:
    # sum_k a[k-1] * sawtooth(2^k x); once 2^k x is an exact integer every
    # later doubling stays integral, so the remaining terms vanish
    cdef double acc = 0.0
    cdef double v = x
    cdef double f
    cdef Py_ssize_t k
    for k in range(K):
        v *= 2.0
        f = v - floor(v)
        if f == 0.0:
            break
        if f > 0.5:
            f = 1.0 - f
        acc += a[k] * f
    return acc


cdef inline double _psi(double z) noexcept nogil:
    cdef double az
    if z == 0.0:
        return 0.0
    az = pow(fabs(z), 0.4)
    az = az / (1.0 + az)
    return az if z > 0.0 else -az


def g_series_batch(const double[::1] x, const double[::1] a):
    """Vectorized multiscale series evaluation (shares _g with the kernels)."""
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t K = a.shape[0]
    out = np.empty(m)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(m):
        o[i] = _g(x[i], a, K)
    return out


def solve_example_a(double x0, const double[::1] dW, const double[::1] w,
                    const double[::1] a):
    """Polygonal recursion for the 1-D singular-drift problem."""
    cdef Py_ssize_t n = dW.shape[0]
    cdef Py_ssize_t K = a.shape[0]
    states = np.empty(n + 1)
    cdef double[::1] s = states
    cdef double x = x0
    cdef Py_ssize_t k
    s[0] = x
    for k in range(n):
        x = x + w[k] * _g(x, a, K) + (1.0 + 0.5 * tanh(x)) * dW[k]
        s[k + 1] = x
    return states


def solve_example_b(const double[::1] x0, const double[:, ::1] dW,
                    const double[::1] w, const double[::1] a):
    """Polygonal recursion for the 2-D coupled problem; dW has shape (2, n)."""
    cdef Py_ssize_t n = dW.shape[1]
    cdef Py_ssize_t K = a.shape[0]
    cdef double dt = 1.0 / n
    states = np.empty((n + 1, 2))
    cdef double[:, ::1] s = states
    cdef double x1 = x0[0], x2 = x0[1]
    cdef double g1, g2, h1, h2, s11, s22, s12, d1, d2
    cdef Py_ssize_t k
    s[0, 0] = x1
    s[0, 1] = x2
    for k in range(n):
        g1 = _g(x1 + 0.35 * x2, a, K)
        g2 = _g(x2 - 0.25 * x1, a, K)
        h1 = 0.25 * tanh(x2) + 0.1 * _psi(x1 - x2)
        h2 = _psi(x2) + 0.12 * tanh(x1) + 0.08 * _psi(x1 + x2)
        s11 = 1.0 + 0.25 * tanh(x1)
        s22 = 1.0 + 0.25 * tanh(x2)
        s12 = 0.075 * tanh(x1 + x2)
        d1 = dW[0, k]
        d2 = dW[1, k]
        x1 = x1 + w[k] * g1 + dt * h1 + s11 * d1 + s12 * d2
        x2 = x2 + w[k] * g2 + dt * h2 + s12 * d1 + s22 * d2
        s[k + 1, 0] = x1
        s[k + 1, 1] = x2
    return states


def solve_lower_bound(double x0, const double[::1] dW):
    """Euler-Maruyama recursion for the driftless sigma = 2 + tanh problem."""
    cdef Py_ssize_t n = dW.shape[0]
    states = np.empty(n + 1)
    cdef double[::1] s = states
    cdef double x = x0
    cdef Py_ssize_t k
    s[0] = x
    for k in range(n):
        x = x + (2.0 + tanh(x)) * dW[k]
        s[k + 1] = x
    return states
