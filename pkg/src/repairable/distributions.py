"""Unit-mean renewal distributions and mean-one frailty distributions.

Renewal distributions ``F`` are parameterized so that ``E[W] = 1``:

* ``Exponential()``
* ``Weibull(shape)`` with scale ``1 / Gamma(1 + 1/shape)``
* ``Gamma(variance)`` with shape ``1/variance`` and scale ``variance``

``Lifetime(dist, rate)`` rescales a unit-mean distribution to mean
``1/rate``; it supplies the hazard ``z`` of a new system for virtual-age
models and the component hazards of the competing-risks module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize, special

from .errors import DomainError, NumericalError

_LOG_TINY = math.log(np.finfo(float).tiny)


def _arr(x):
    return np.asarray(x, dtype=float)


def _ret(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


class RenewalDistribution:
    """Interface shared by the unit-mean families.

    Subclasses implement ``cumhaz``, ``loghazard`` and ``cumhaz_inverse``;
    everything else derives from those three.
    """

    name = "abstract"

    @property
    def params(self) -> dict:
        return {}

    # -- primitives -------------------------------------------------------
    def cumhaz(self, t):
        raise NotImplementedError

    def loghazard(self, t):
        raise NotImplementedError

    def cumhaz_inverse(self, y):
        raise NotImplementedError

    # -- derived ------------------------------------------------------------
    def hazard(self, t):
        return _ret(np.exp(self.loghazard(t)))

    def logsf(self, t):
        return _ret(-_arr(self.cumhaz(t)))

    def sf(self, t):
        return _ret(np.exp(-_arr(self.cumhaz(t))))

    def cdf(self, t):
        return _ret(-np.expm1(-_arr(self.cumhaz(t))))

    def logpdf(self, t):
        return _ret(_arr(self.loghazard(t)) - _arr(self.cumhaz(t)))

    def pdf(self, t):
        return _ret(np.exp(self.logpdf(t)))

    def quantile(self, u):
        u = _arr(u)
        if np.any((u < 0) | (u >= 1)):
            raise DomainError("quantile argument must lie in [0, 1)")
        return self.cumhaz_inverse(-np.log1p(-u))

    def conditional_quantile(self, v, u):
        """Residual time ``x`` with ``F_v(x) = u`` for a unit of age ``v``.

        ``F_v(x) = (F(v + x) - F(v)) / (1 - F(v))``; solved on the cumulative
        hazard scale, ``Z(v + x) = Z(v) - log(1 - u)``.
        """
        v = _arr(v)
        u = _arr(u)
        if np.any((u < 0) | (u >= 1)):
            raise DomainError("probability must lie in [0, 1)")
        if np.any(v < 0):
            raise DomainError("virtual age must be nonnegative")
        zv = _arr(self.cumhaz(v))
        if np.any(~np.isfinite(zv) | (-zv < _LOG_TINY)):
            raise NumericalError("degenerate conditional distribution: survival underflows at the given age")
        x = _arr(self.cumhaz_inverse(zv - np.log1p(-u))) - v
        return _ret(np.maximum(x, 0.0))

    def sample(self, rng, size=None):
        return self.quantile(rng.random(size))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.params.items()))))


class Exponential(RenewalDistribution):
    name = "exponential"

    def cumhaz(self, t):
        return _ret(np.maximum(_arr(t), 0.0))

    def loghazard(self, t):
        return _ret(np.zeros_like(_arr(t)))

    def cumhaz_inverse(self, y):
        return _ret(_arr(y))

    def conditional_quantile(self, v, u):
        u = _arr(u)
        if np.any((u < 0) | (u >= 1)):
            raise DomainError("probability must lie in [0, 1)")
        return _ret(-np.log1p(-u) + 0.0 * _arr(v))


class Weibull(RenewalDistribution):
    """Weibull law with shape ``s`` and unit mean."""

    name = "weibull"

    def __init__(self, shape: float):
        shape = float(shape)
        if not shape > 0 or not np.isfinite(shape):
            raise DomainError(f"Weibull shape must be positive, got {shape!r}")
        self.shape = shape
        self.scale = 1.0 / math.gamma(1.0 + 1.0 / shape)

    @property
    def params(self):
        return {"s": self.shape}

    def cumhaz(self, t):
        t = np.maximum(_arr(t), 0.0)
        return _ret((t / self.scale) ** self.shape)

    def loghazard(self, t):
        t = _arr(t)
        s, a = self.shape, self.scale
        with np.errstate(divide="ignore"):
            return _ret(math.log(s / a) + (s - 1.0) * np.log(t / a))

    def cumhaz_inverse(self, y):
        y = np.maximum(_arr(y), 0.0)
        return _ret(self.scale * y ** (1.0 / self.shape))


class Gamma(RenewalDistribution):
    """Gamma law with unit mean and variance ``gamma``."""

    name = "gamma"

    def __init__(self, variance: float):
        variance = float(variance)
        if not variance > 0 or not np.isfinite(variance):
            raise DomainError(f"Gamma variance must be positive, got {variance!r}")
        self.variance = variance
        self.k = 1.0 / variance
        self.theta = variance

    @property
    def params(self):
        return {"gamma": self.variance}

    def logsf(self, t):
        x = np.maximum(_arr(t), 0.0) / self.theta
        q = special.gammaincc(self.k, x)
        p = special.gammainc(self.k, x)
        with np.errstate(divide="ignore"):
            # log1p(-P) keeps relative accuracy when the survival is near one
            out = np.where(p < 0.5, np.log1p(-p), np.log(q))
        small = q < 1e-280
        if np.any(small):
            # large-argument expansion of the upper regularized incomplete gamma
            xs = np.atleast_1d(x)[np.atleast_1d(small)]
            a = self.k
            series = 1.0 + (a - 1) / xs + (a - 1) * (a - 2) / xs**2 + (a - 1) * (a - 2) * (a - 3) / xs**3
            approx = (a - 1) * np.log(xs) - xs - special.gammaln(a) + np.log(series)
            out = np.atleast_1d(out).copy()
            out[np.atleast_1d(small)] = approx
            out = out.reshape(np.shape(x))
        return _ret(out)

    def cumhaz(self, t):
        return _ret(-_arr(self.logsf(t)))

    def logpdf(self, t):
        t = _arr(t)
        k, th = self.k, self.theta
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -special.gammaln(k) - k * math.log(th) + (k - 1.0) * np.log(t) - t / th
        if k == 1.0:
            out = np.where(t == 0, 0.0, out)
        return _ret(out)

    def loghazard(self, t):
        return _ret(_arr(self.logpdf(t)) - _arr(self.logsf(t)))

    def cdf(self, t):
        return _ret(special.gammainc(self.k, np.maximum(_arr(t), 0.0) / self.theta))

    def sf(self, t):
        return _ret(special.gammaincc(self.k, np.maximum(_arr(t), 0.0) / self.theta))

    def _far_tail_inverse(self, y: float) -> float:
        hi = max(1.0, self.theta * (y + self.k))
        while self.cumhaz(hi) < y:
            hi *= 2.0
        return optimize.brentq(lambda s: self.cumhaz(s) - y, 0.0, hi, xtol=1e-14, rtol=1e-15)

    def cumhaz_inverse(self, y):
        y = np.asarray(y, dtype=float)
        shape = y.shape
        y = y.ravel()
        x = np.zeros_like(y)
        lo = (y > 0) & (y < math.log(2.0))
        mid = (y >= math.log(2.0)) & (y < 650.0)
        far = y >= 650.0
        x[lo] = special.gammaincinv(self.k, -np.expm1(-y[lo])) * self.theta
        x[mid] = special.gammainccinv(self.k, np.exp(-y[mid])) * self.theta
        for i in np.flatnonzero(far):
            x[i] = self._far_tail_inverse(float(y[i]))
        # Newton polish on the cumulative-hazard scale
        live = (y > 0) & (x > 0) & np.isfinite(x)
        for _ in range(3):
            if not np.any(live):
                break
            xi = x[live]
            with np.errstate(over="ignore", invalid="ignore"):
                step = (np.asarray(self.cumhaz(xi)) - y[live]) / np.asarray(self.hazard(xi))
            ok = np.isfinite(step) & (xi - step > 0)
            xi = np.where(ok, xi - step, xi)
            x[live] = xi
            done = ~ok | (np.abs(step) <= 1e-15 * xi)
            idx = np.flatnonzero(live)
            live[idx[done]] = False
        return _ret(x.reshape(shape))


def renewal_from_name(name: str, **params) -> RenewalDistribution:
    name = name.lower()
    if name in ("exponential", "exp"):
        return Exponential()
    if name == "weibull":
        return Weibull(params.get("s", params.get("shape", 1.0)))
    if name == "gamma":
        return Gamma(params.get("gamma", params.get("variance", 1.0)))
    raise DomainError(f"unknown renewal family {name!r}")


@dataclass(frozen=True)
class Lifetime:
    """Unit-mean law ``dist`` stretched to mean ``1/rate``.

    With ``W ~ dist`` the lifetime is ``W / rate``; so ``z(t) = rate *
    z_dist(rate * t)`` and ``Z(t) = Z_dist(rate * t)``.
    """

    dist: RenewalDistribution
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0 or not np.isfinite(self.rate):
            raise DomainError(f"rate must be positive, got {self.rate!r}")

    def hazard(self, t):
        return _ret(self.rate * _arr(self.dist.hazard(self.rate * _arr(t))))

    def loghazard(self, t):
        return _ret(math.log(self.rate) + _arr(self.dist.loghazard(self.rate * _arr(t))))

    def cumhaz(self, t):
        return self.dist.cumhaz(self.rate * _arr(t))

    def cumhaz_inverse(self, y):
        return _ret(_arr(self.dist.cumhaz_inverse(y)) / self.rate)

    def logpdf(self, t):
        return _ret(math.log(self.rate) + _arr(self.dist.logpdf(self.rate * _arr(t))))

    def sf(self, t):
        return self.dist.sf(self.rate * _arr(t))

    def conditional_quantile(self, v, u):
        return _ret(_arr(self.dist.conditional_quantile(self.rate * _arr(v), u)) / self.rate)


# --------------------------------------------------------------------------
# frailty


class FrailtyDistribution:
    variance = 0.0

    @property
    def is_degenerate(self) -> bool:
        return self.variance == 0.0


class DegenerateFrailty(FrailtyDistribution):
    """Point mass at one: no heterogeneity."""

    variance = 0.0

    def sample(self, rng, size=None):
        return 1.0 if size is None else np.ones(size)

    def __repr__(self):
        return "DegenerateFrailty()"

    def __eq__(self, other):
        return isinstance(other, DegenerateFrailty)

    def __hash__(self):
        return hash("degenerate")


class GammaFrailty(FrailtyDistribution):
    """Gamma frailty with mean one and variance ``delta``."""

    def __init__(self, variance: float):
        variance = float(variance)
        if not variance > 0 or not np.isfinite(variance):
            raise DomainError(f"frailty variance must be positive, got {variance!r}")
        self.variance = variance

    def sample(self, rng, size=None):
        return rng.gamma(1.0 / self.variance, self.variance, size)

    def __repr__(self):
        return f"GammaFrailty(variance={self.variance!r})"

    def __eq__(self, other):
        return isinstance(other, GammaFrailty) and other.variance == self.variance

    def __hash__(self):
        return hash(("gamma", self.variance))


def frailty_from_variance(variance: float) -> FrailtyDistribution:
    return DegenerateFrailty() if variance == 0 else GammaFrailty(variance)


def frailty_quadrature(h: FrailtyDistribution, node_count: int):
    """Gauss rule for expectations over a mean-one gamma frailty.

    Nodes and weights of the generalized Gauss-Laguerre rule with parameter
    ``1/delta - 1``, built from the normalized Jacobi matrix (Golub-Welsch),
    then mapped ``a = delta * x``.  The rule integrates polynomials in ``a``
    of degree up to ``2 * node_count - 1`` exactly against the gamma law.

    Returns
    -------
    nodes, weights : ndarray
        Weights sum to one.
    """
    if isinstance(h, DegenerateFrailty) or h.variance == 0:
        raise DomainError("degenerate frailty has no quadrature; use the frailty-free likelihood")
    n = int(node_count)
    if n < 1:
        raise DomainError("node_count must be at least 1")
    delta = h.variance
    alpha = 1.0 / delta - 1.0
    i = np.arange(n, dtype=float)
    diag = 2.0 * i + alpha + 1.0
    if n == 1:
        return np.array([delta * diag[0]]), np.array([1.0])
    off = np.sqrt(i[1:] * (i[1:] + alpha))
    x, vecs = linalg.eigh_tridiagonal(diag, off)
    w = vecs[0, :] ** 2
    w = w / w.sum()
    return delta * x, w
