"""Pure-Python reference implementations of the compiled kernels.

Signatures and results match ``_kernels.pyx`` exactly; the selector in
``_core`` falls back to this module when the extension is unavailable.
"""

import math

import numpy as np

PERFECT, MINIMAL, KIJIMA1, KIJIMA2, AGE_RED_FULL, AGE_RED_INCR = range(6)


def virtual_ages(x, d, kind, rho):
    """Post-repair ages ``v(0) = 0, v(1), ..., v(n)`` for gaps ``x`` and
    repair effects ``d``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    d = np.ascontiguousarray(d, dtype=np.float64)
    n = x.shape[0]
    out = np.zeros(n + 1)
    v = 0.0
    for i in range(n):
        xi = x[i]
        if kind == PERFECT:
            v = 0.0
        elif kind == MINIMAL:
            v = v + xi
        elif kind == KIJIMA1:
            v = v + d[i] * xi
        elif kind == KIJIMA2:
            v = d[i] * (v + xi)
        elif kind == AGE_RED_FULL:
            v = (1.0 - rho) * (v + xi)
        elif kind == AGE_RED_INCR:
            v = v + (1.0 - rho) * xi
        else:
            raise ValueError(f"unknown policy kind {kind}")
        out[i + 1] = v
    return out


def simulate_va_weibull(e, d, kind, rho, shape, scale, c, mult, tau, v, t):
    """Advance a Weibull virtual-age process by inversion.

    Consumes unit exponentials ``e`` and repair effects ``d`` until an event
    overshoots ``tau`` or the draws run out.  Returns ``(times, used, v, t,
    done)`` so a caller can continue with a fresh chunk of draws.
    """
    e = np.ascontiguousarray(e, dtype=np.float64)
    d = np.ascontiguousarray(d, dtype=np.float64)
    n = e.shape[0]
    times = np.empty(n)
    k = 0
    inv_s = 1.0 / shape
    for i in range(n):
        y = (c * v / scale) ** shape + e[i] / mult
        x = scale * y**inv_s / c - v
        t_new = t + x
        if t_new > tau:
            return times[:k], i + 1, v, t, True
        times[k] = t_new
        k += 1
        t = t_new
        if kind == PERFECT:
            v = 0.0
        elif kind == MINIMAL:
            v = v + x
        elif kind == KIJIMA1:
            v = v + d[i] * x
        elif kind == KIJIMA2:
            v = d[i] * (v + x)
        elif kind == AGE_RED_FULL:
            v = (1.0 - rho) * (v + x)
        elif kind == AGE_RED_INCR:
            v = v + (1.0 - rho) * x
        else:
            raise ValueError(f"unknown policy kind {kind}")
    return times[:k], n, v, t, False


def mann_count(x):
    """Number of pairs ``i < j`` with ``x[i] < x[j]``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    total = 0
    for i in range(n - 1):
        total += int(np.count_nonzero(x[i + 1:] > x[i]))
    return total
