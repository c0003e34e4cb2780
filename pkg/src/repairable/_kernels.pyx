# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: virtual-age recursions, Weibull virtual-age
simulation and the Mann pair count."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()

cdef enum:
    PERFECT = 0
    MINIMAL = 1
    KIJIMA1 = 2
    KIJIMA2 = 3
    AGE_RED_FULL = 4
    AGE_RED_INCR = 5


cdef inline double _update(int kind, double v, double x, double d, double rho) nogil:
    if kind == PERFECT:
        return 0.0
    elif kind == MINIMAL:
        return v + x
    elif kind == KIJIMA1:
        return v + d * x
    elif kind == KIJIMA2:
        return d * (v + x)
    elif kind == AGE_RED_FULL:
        return (1.0 - rho) * (v + x)
    else:
        return v + (1.0 - rho) * x


def virtual_ages(x, d, int kind, double rho):
    if kind < 0 or kind > 5:
        raise ValueError(f"unknown policy kind {kind}")
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i
    out = np.zeros(n + 1)
    cdef double[::1] ov = out
    cdef double v = 0.0
    with nogil:
        for i in range(n):
            v = _update(kind, v, xv[i], dv[i], rho)
            ov[i + 1] = v
    return out


def simulate_va_weibull(e, d, int kind, double rho, double shape, double scale,
                        double c, double mult, double tau, double v, double t):
    if kind < 0 or kind > 5:
        raise ValueError(f"unknown policy kind {kind}")
    cdef double[::1] ev = np.ascontiguousarray(e, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n = ev.shape[0], i, k = 0
    times = np.empty(n)
    cdef double[::1] tv = times
    cdef double inv_s = 1.0 / shape, y, x, t_new
    cdef bint done = False
    cdef Py_ssize_t used = n
    with nogil:
        for i in range(n):
            y = pow(c * v / scale, shape) + ev[i] / mult
            x = scale * pow(y, inv_s) / c - v
            t_new = t + x
            if t_new > tau:
                done = True
                used = i + 1
                break
            tv[k] = t_new
            k += 1
            t = t_new
            v = _update(kind, v, x, dv[i], rho)
    return times[:k], used, v, t, done


def mann_count(x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i, j
    cdef long long total = 0
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                if xv[i] < xv[j]:
                    total += 1
    return int(total)
