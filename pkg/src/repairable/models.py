"""Single-type model specifications and their conditional intensities.

Three families are supported:

* ``TRPModel(renewal, trend, frailty)``: the trend-renewal process and its
  cube sub-models (HPP, RP, NHPP and their heterogeneous versions).
* ``VirtualAgeModel(lifetime, policy, frailty)``: ``gamma(t) = z(A(t))``.
* ``LogLinearModulatedModel``: ``exp(b0 + b1 g1(t) + b2 g2(t - T_{N(t-)}))``.

Every model accepts a covariate coefficient vector ``beta``; the intensity
is multiplied by ``exp(beta' Z)``.  Each model exposes per-system pieces
used by the likelihood, simulation and residual code:

``log_intensity_at_events(h)``
    ``log gamma_0(T_i)`` without the covariate factor.
``compensator_increments(h)``
    ``int gamma_0`` over each gap ``(T_{i-1}, T_i]`` followed by the tail
    ``(T_n, tau]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from .distributions import (
    DegenerateFrailty,
    Exponential,
    FrailtyDistribution,
    GammaFrailty,
    Lifetime,
    RenewalDistribution,
    frailty_quadrature,
)
from .errors import DataError, DomainError
from .events import truncate
from .repair import Minimal, Perfect, VirtualAgePolicy, post_repair_ages, resolve_effects
from .trends import Constant, PowerLaw, TrendFunction


def _left_index(history, t):
    """``N(t-)``: number of events strictly before ``t``."""
    return np.searchsorted(history.times, t, side="left")


class Model:
    """Common covariate and frailty handling."""

    frailty: FrailtyDistribution
    beta: tuple | None

    #: frailty multiplies the whole intensity (false only for the HTRP)
    multiplicative = True

    def covariate_log_multiplier(self, history) -> float:
        if self.beta is None or len(self.beta) == 0:
            return 0.0
        z = history.covariates
        beta = np.asarray(self.beta, dtype=float)
        if z is None:
            raise DataError(f"system {history.system_id}: model has covariate coefficients but the system has no covariates")
        if z.size != beta.size:
            raise DataError(
                f"system {history.system_id}: {z.size} covariates for {beta.size} coefficients"
            )
        return float(beta @ z)

    def with_frailty(self, frailty):
        return replace(self, frailty=frailty)

    def without_frailty(self):
        return replace(self, frailty=DegenerateFrailty())

    # subclasses
    def base_intensity(self, history, t, effects=None):
        raise NotImplementedError

    def log_intensity_at_events(self, history, effects=None):
        raise NotImplementedError

    def compensator_increments(self, history, effects=None):
        raise NotImplementedError

    def cumulative_intensity(self, history, t, effects=None) -> float:
        """``int_0^t gamma_0(u) du`` for ``t`` in ``(0, tau]``, frailty and covariates excluded."""
        return _cumulative_before(self, history, t, effects)


# --------------------------------------------------------------------------
# trend-renewal cube


@dataclass(frozen=True)
class TRPModel(Model):
    """Trend-renewal process ``TRP(F, lambda)`` with optional frailty.

    ``gamma(t) = z(Lambda(t) - Lambda(T_{N(t-)})) lambda(t)``.  Gamma frailty
    multiplies the trend (``a lambda``), which is multiplicative in ``gamma``
    only when ``F`` is exponential.
    """

    renewal: RenewalDistribution = field(default_factory=Exponential)
    trend: TrendFunction = field(default_factory=Constant)
    frailty: FrailtyDistribution = field(default_factory=DegenerateFrailty)
    beta: tuple | None = None

    @classmethod
    def hpp(cls, rate=1.0, **kw):
        return cls(Exponential(), Constant(rate), **kw)

    @classmethod
    def nhpp(cls, trend, **kw):
        return cls(Exponential(), trend, **kw)

    @classmethod
    def rp(cls, renewal, rate=1.0, **kw):
        return cls(renewal, Constant(rate), **kw)

    @property
    def multiplicative(self):
        return isinstance(self.renewal, Exponential) or self.frailty.is_degenerate

    @property
    def corner(self) -> str:
        renewal = not isinstance(self.renewal, Exponential)
        trend = not (isinstance(self.trend, Constant) or (isinstance(self.trend, PowerLaw) and self.trend.b == 1.0))
        base = {(False, False): "HPP", (True, False): "RP", (False, True): "NHPP", (True, True): "TRP"}[
            (renewal, trend)
        ]
        return ("H" if not self.frailty.is_degenerate else "") + base

    def base_intensity(self, history, t, effects=None):
        t = np.asarray(t, dtype=float)
        k = _left_index(history, t)
        last = np.concatenate([[0.0], history.times])[k]
        dl = self.trend.cumulative(t) - self.trend.cumulative(last)
        out = np.asarray(self.renewal.hazard(dl)) * np.asarray(self.trend.rate(t))
        return float(out) if out.ndim == 0 else out

    def transformed_gaps(self, history, scale=1.0):
        """``Delta Lambda_i`` for each gap followed by the tail."""
        cum = self.trend.cumulative(np.concatenate([[0.0], history.times, [history.censor_time]]))
        return scale * np.diff(np.asarray(cum, dtype=float))

    def log_intensity_at_events(self, history, effects=None):
        if history.n_events == 0:
            return np.zeros(0)
        dl = self.transformed_gaps(history)[:-1]
        return np.asarray(self.renewal.loghazard(dl)) + np.asarray(self.trend.log_rate(history.times))

    def compensator_increments(self, history, effects=None):
        return np.asarray(self.renewal.cumhaz(self.transformed_gaps(history)), dtype=float)


# --------------------------------------------------------------------------
# virtual age


@dataclass(frozen=True)
class VirtualAgeModel(Model):
    """``gamma(t) = z(A(t))`` with ``z`` the hazard of a new unit."""

    lifetime: Lifetime = field(default_factory=lambda: Lifetime(Exponential()))
    policy: VirtualAgePolicy = field(default_factory=Perfect)
    frailty: FrailtyDistribution = field(default_factory=DegenerateFrailty)
    beta: tuple | None = None

    @property
    def hazard_is_constant(self) -> bool:
        d = self.lifetime.dist
        return isinstance(d, Exponential) or getattr(d, "shape", None) == 1.0 or getattr(d, "variance", None) == 1.0

    def ages(self, history, effects=None):
        d = resolve_effects(self.policy, history, effects)
        return post_repair_ages(self.policy, history.interevent_times(), d)

    def base_intensity(self, history, t, effects=None):
        t = np.asarray(t, dtype=float)
        v = self.ages(history, effects)
        k = _left_index(history, t)
        last = np.concatenate([[0.0], history.times])[k]
        out = np.asarray(self.lifetime.hazard(v[k] + t - last))
        return float(out) if out.ndim == 0 else out

    def log_intensity_at_events(self, history, effects=None):
        if history.n_events == 0:
            return np.zeros(0)
        v = self.ages(history, effects)
        x = history.interevent_times()
        return np.asarray(self.lifetime.loghazard(v[:-1] + x), dtype=float)

    def compensator_increments(self, history, effects=None):
        v = self.ages(history, effects)
        x = np.concatenate([history.interevent_times(), [history.tail()]])
        z = self.lifetime.cumhaz
        return np.asarray(z(v + x), dtype=float) - np.asarray(z(v), dtype=float)


# --------------------------------------------------------------------------
# log-linear modulated


_LINKS = ("identity", "log")


@dataclass(frozen=True)
class LogLinearModulatedModel(Model):
    """``gamma(t) = exp(b0 + b1 g1(t) + b2 g2(t - T_{N(t-)}))``.

    ``g1``, ``g2`` are ``"identity"`` or ``"log"``.  ``b1 = 0`` with
    identity links is a renewal process with hazard ``exp(b0 + b2 u)``;
    ``b2 = 0`` is an NHPP.
    """

    b0: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    g1: str = "identity"
    g2: str = "identity"
    frailty: FrailtyDistribution = field(default_factory=DegenerateFrailty)
    beta: tuple | None = None

    def __post_init__(self):
        for g in (self.g1, self.g2):
            if g not in _LINKS:
                raise DomainError(f"link must be one of {_LINKS}, got {g!r}")

    def _log_rate(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if (self.g1 == "log" and self.b1 != 0 and np.any(t <= 0)) or (
            self.g2 == "log" and self.b2 != 0 and np.any(s <= 0)
        ):
            raise DomainError("undefined link at zero")
        out = np.full(np.broadcast(t, s).shape, self.b0)
        if self.b1 != 0:
            out = out + self.b1 * (t if self.g1 == "identity" else np.log(t))
        if self.b2 != 0:
            out = out + self.b2 * (s if self.g2 == "identity" else np.log(s))
        return out

    def base_intensity(self, history, t, effects=None):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("undefined link at zero" if "log" in (self.g1, self.g2) else "time must be positive")
        k = _left_index(history, t)
        last = np.concatenate([[0.0], history.times])[k]
        out = np.exp(self._log_rate(t, t - last))
        return float(out) if out.ndim == 0 else out

    def log_intensity_at_events(self, history, effects=None):
        if history.n_events == 0:
            return np.zeros(0)
        return self._log_rate(history.times, history.interevent_times())

    def _powers(self, start):
        """Exponents of ``(u - start)`` and ``u`` contributed by log links."""
        p2 = self.b2 if (self.g2 == "log" and self.b2 != 0) else 0.0
        p1 = self.b1 if (self.g1 == "log" and self.b1 != 0) else 0.0
        return p1, p2

    def interval_integral(self, start: float, length: float) -> float:
        """``int_0^length gamma(start + s) ds`` with the last event at ``start``."""
        if length <= 0:
            return 0.0
        b0, b1, b2 = self.b0, self.b1, self.b2
        k1 = b1 if self.g1 == "identity" else 0.0
        k2 = b2 if self.g2 == "identity" else 0.0
        p1, p2 = self._powers(start)
        if p1 == 0.0 and p2 == 0.0:
            k = k1 + k2
            base = math.exp(b0 + k1 * start)
            return base * (math.expm1(k * length) / k if k != 0 else length)
        # log links: algebraic endpoint weight at s = 0 handles the singularity
        alpha = p2 + (p1 if start == 0 else 0.0)
        if alpha <= -1.0:
            raise DomainError("intensity is not integrable after an event for this link exponent")
        if k1 == 0.0 and k2 == 0.0 and (p1 == 0.0 or start == 0):
            # pure power of s
            return math.exp(b0) * length ** (alpha + 1.0) / (alpha + 1.0)

        def smooth(s):
            u = start + s
            val = b0 + k1 * u + k2 * s
            if p1 != 0.0 and start > 0:
                val += p1 * math.log(u)
            return math.exp(val)

        value, _ = integrate.quad(
            smooth, 0.0, length, weight="alg", wvar=(alpha, 0.0), epsabs=0.0, epsrel=1e-12, limit=200
        )
        return value

    def interval_inverse(self, start: float, target: float) -> float:
        """Gap ``x`` with ``int_0^x gamma(start + s) ds = target``; ``inf`` if unreachable."""
        k1 = self.b1 if self.g1 == "identity" else 0.0
        k2 = self.b2 if self.g2 == "identity" else 0.0
        p1, p2 = self._powers(start)
        if p1 == 0.0 and p2 == 0.0:
            k = k1 + k2
            base = math.exp(self.b0 + k1 * start)
            if k == 0:
                return target / base
            arg = k * target / base
            if arg <= -1.0:
                return math.inf
            return math.log1p(arg) / k
        if k1 == 0.0 and k2 == 0.0 and (p1 == 0.0 or start == 0):
            alpha = p2 + p1
            return (target * (alpha + 1.0) / math.exp(self.b0)) ** (1.0 / (alpha + 1.0))
        hi, prev = 1.0, 0.0
        while (cur := self.interval_integral(start, hi)) < target:
            # total mass has saturated below the target
            if hi > 1e15 or (hi > 64.0 and cur - prev <= 1e-13 * cur):
                return math.inf
            hi, prev = 2.0 * hi, cur
        return optimize.brentq(lambda x: self.interval_integral(start, x) - target, 0.0, hi, xtol=1e-13, rtol=1e-14)

    def compensator_increments(self, history, effects=None):
        starts = np.concatenate([[0.0], history.times])
        lengths = np.concatenate([history.interevent_times(), [history.tail()]])
        return np.array([self.interval_integral(s, x) for s, x in zip(starts, lengths)])


# --------------------------------------------------------------------------
# evaluation


def conditional_intensity(spec: Model, history, t, effects=None, frailty_value=None):
    """Conditional intensity ``gamma(t | F_{t-})``.

    For a frailty model the realized frailty may be passed as
    ``frailty_value``; otherwise the marginal intensity given the observed
    history is returned (posterior-mean frailty for multiplicative models,
    quadrature over the frailty posterior for the HTRP).
    """
    g = math.exp(spec.covariate_log_multiplier(history))
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0) or np.any(t_arr > history.censor_time):
        raise DomainError("intensity is defined for t in (0, tau]")
    if spec.frailty.is_degenerate:
        a = 1.0 if frailty_value is None else float(frailty_value)
        return _scaled_intensity(spec, history, t_arr, effects, a, g)
    if frailty_value is not None:
        return _scaled_intensity(spec, history, t_arr, effects, float(frailty_value), g)
    delta = spec.frailty.variance
    if spec.multiplicative:
        def one(tt):
            k = int(_left_index(history, tt))
            cum = g * _cumulative_before(spec, history, tt, effects)
            post = (k + 1.0 / delta) / (cum + 1.0 / delta)
            return post * g * float(spec.base_intensity(history, tt, effects))
    else:
        nodes, weights = frailty_quadrature(spec.frailty, 64)

        def one(tt):
            k = int(_left_index(history, tt))
            part = truncate(history, k, tt)
            logs = np.array([_htrp_log_integrand(spec, part, a, g) for a in nodes]) + np.log(weights)
            w = np.exp(logs - logs.max())
            w /= w.sum()
            rates = np.array([_scaled_intensity(spec, history, tt, effects, a, g) for a in nodes])
            return float(w @ rates)

    out = np.vectorize(one, otypes=[float])(t_arr)
    return float(out) if out.ndim == 0 else out


def _scaled_intensity(spec, history, t, effects, a, g):
    if isinstance(spec, TRPModel) and not spec.multiplicative:
        k = _left_index(history, t)
        last = np.concatenate([[0.0], history.times])[k]
        dl = a * (spec.trend.cumulative(t) - spec.trend.cumulative(last))
        out = g * a * np.asarray(spec.renewal.hazard(dl)) * np.asarray(spec.trend.rate(t))
    else:
        out = g * a * np.asarray(spec.base_intensity(history, t, effects))
    return float(out) if np.ndim(out) == 0 else out


def _cumulative_before(spec, history, t, effects):
    k = int(_left_index(history, t))
    part = truncate(history, k, t)
    eff = None if effects is None else np.asarray(effects)[:k]
    return float(np.sum(spec.compensator_increments(part, eff)))


def _htrp_log_integrand(spec, history, a, g=1.0):
    """``log`` of the likelihood of one system given frailty ``a`` (trend ``a lambda``)."""
    dl = a * spec.transformed_gaps(history)
    F = spec.renewal
    out = np.sum(np.log(a) + np.asarray(spec.trend.log_rate(history.times))) if history.n_events else 0.0
    if g == 1.0:
        out += np.sum(np.asarray(F.logpdf(dl[:-1]))) + float(F.logsf(dl[-1]))
    else:
        out += history.n_events * math.log(g) + np.sum(np.asarray(F.loghazard(dl[:-1])))
        out -= g * np.sum(np.asarray(F.cumhaz(dl)))
    return float(out)
