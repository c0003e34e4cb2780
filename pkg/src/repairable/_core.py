"""Kernel selection: the compiled extension when importable, otherwise the
pure-Python fallback.  Set ``REPAIRABLE_PURE_PYTHON=1`` to force the
fallback."""

import os

if os.environ.get("REPAIRABLE_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels

        BACKEND = "python"

virtual_ages = kernels.virtual_ages
simulate_va_weibull = kernels.simulate_va_weibull
mann_count = kernels.mann_count

__all__ = ["BACKEND", "virtual_ages", "simulate_va_weibull", "mann_count"]
