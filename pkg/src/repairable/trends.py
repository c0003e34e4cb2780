"""Trend functions ``lambda(t)`` with closed-form cumulative ``Lambda`` and
inverse ``Lambda^{-1}``."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError


def _arr(x):
    return np.asarray(x, dtype=float)


def _ret(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


class TrendFunction:
    name = "abstract"

    @property
    def params(self) -> dict:
        return {}

    @property
    def supremum(self) -> float:
        """``Lambda(infinity)``; finite only for decaying log-linear trends."""
        return math.inf

    def rate(self, t):
        return _ret(np.exp(self.log_rate(t)))

    def log_rate(self, t):
        raise NotImplementedError

    def cumulative(self, t):
        raise NotImplementedError

    def inverse(self, u):
        raise NotImplementedError

    def rescaled(self, k: float) -> "TrendFunction":
        """Trend of the time-changed process ``t -> k t``: ``Lambda_k(t) = Lambda(t / k)``."""
        raise NotImplementedError

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.params.items()))))


class Constant(TrendFunction):
    """``lambda(t) = rate``."""

    name = "constant"

    def __init__(self, rate: float = 1.0):
        rate = float(rate)
        if not rate > 0 or not np.isfinite(rate):
            raise DomainError(f"constant rate must be positive, got {rate!r}")
        self.value = rate

    @property
    def params(self):
        return {"rate": self.value}

    def log_rate(self, t):
        return _ret(np.full_like(_arr(t), math.log(self.value)))

    def cumulative(self, t):
        return _ret(self.value * _arr(t))

    def inverse(self, u):
        u = _arr(u)
        if np.any(u < 0):
            raise DomainError("cumulative trend value must be nonnegative")
        return _ret(u / self.value)

    def rescaled(self, k):
        return Constant(self.value / k)


class PowerLaw(TrendFunction):
    """``lambda(t) = c b t^(b-1)``, ``Lambda(t) = c t^b``."""

    name = "power"

    def __init__(self, c: float = 1.0, b: float = 1.0):
        c, b = float(c), float(b)
        if not (c > 0 and b > 0 and np.isfinite(c) and np.isfinite(b)):
            raise DomainError(f"power-law trend requires c > 0 and b > 0, got c={c!r}, b={b!r}")
        self.c = c
        self.b = b

    @property
    def params(self):
        return {"c": self.c, "b": self.b}

    def log_rate(self, t):
        t = _arr(t)
        with np.errstate(divide="ignore"):
            return _ret(math.log(self.c * self.b) + (self.b - 1.0) * np.log(t))

    def cumulative(self, t):
        return _ret(self.c * np.maximum(_arr(t), 0.0) ** self.b)

    def inverse(self, u):
        u = _arr(u)
        if np.any(u < 0):
            raise DomainError("cumulative trend value must be nonnegative")
        return _ret((u / self.c) ** (1.0 / self.b))

    def rescaled(self, k):
        return PowerLaw(self.c / k**self.b, self.b)


class LogLinear(TrendFunction):
    """``lambda(t) = exp(a0 + a1 t)``."""

    name = "loglinear"

    def __init__(self, a0: float = 0.0, a1: float = 0.0):
        a0, a1 = float(a0), float(a1)
        if not (np.isfinite(a0) and np.isfinite(a1)):
            raise DomainError("log-linear trend coefficients must be finite")
        self.a0 = a0
        self.a1 = a1

    @property
    def params(self):
        return {"a0": self.a0, "a1": self.a1}

    @property
    def supremum(self):
        return math.exp(self.a0) / -self.a1 if self.a1 < 0 else math.inf

    def log_rate(self, t):
        return _ret(self.a0 + self.a1 * _arr(t))

    def cumulative(self, t):
        t = _arr(t)
        if self.a1 == 0:
            return _ret(math.exp(self.a0) * t)
        return _ret(math.exp(self.a0) * np.expm1(self.a1 * t) / self.a1)

    def inverse(self, u):
        u = _arr(u)
        if np.any(u < 0) or np.any(u >= self.supremum):
            raise DomainError(f"value outside the range of the cumulative trend [0, {self.supremum!r})")
        if self.a1 == 0:
            return _ret(u * math.exp(-self.a0))
        return _ret(np.log1p(self.a1 * u * math.exp(-self.a0)) / self.a1)

    def rescaled(self, k):
        return LogLinear(self.a0 - math.log(k), self.a1 / k)


def trend_from_name(name: str, **params) -> TrendFunction:
    name = name.lower()
    if name in ("constant", "const", "hpp"):
        return Constant(params.get("rate", params.get("lambda", 1.0)))
    if name in ("power", "powerlaw"):
        return PowerLaw(params.get("c", 1.0), params.get("b", 1.0))
    if name in ("loglinear", "log-linear"):
        return LogLinear(params.get("a0", 0.0), params.get("a1", 0.0))
    raise DomainError(f"unknown trend family {name!r}")
