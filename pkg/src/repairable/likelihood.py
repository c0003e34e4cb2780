"""Exact log-likelihoods for single-type models.

Per system, ``log L = sum_i log gamma(T_i) - int_0^tau gamma(u) du`` with the
integral in closed form.  Gamma frailty is integrated out analytically when
it multiplies the intensity, by Gauss quadrature for the HTRP (frailty on
the trend of a non-exponential TRP, with adaptive integration over ``log a``
once the rule's node cap is reached), and in closed form for the HTRP with
gamma renewal distribution when every window ends at an event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln, logsumexp

from .distributions import Exponential, GammaFrailty, frailty_quadrature
from .errors import DataError, DomainError, QuadratureError
from .events import as_dataset
from .models import Model, TRPModel


@dataclass(frozen=True)
class LogLikelihoodReport:
    """Total and per-system log-likelihood.

    Attributes
    ----------
    total : float
    per_system : ndarray
    system_ids : tuple of str
    method : str
        ``"closed-form"``, ``"quadrature"`` or ``"adaptive-quadrature"``.
    node_count : int or None
        Gauss rule size for quadrature evaluations.
    """

    total: float
    per_system: np.ndarray
    system_ids: tuple
    method: str = "closed-form"
    node_count: int | None = None

    def __float__(self):
        return self.total


def _report(values, d, method="closed-form", node_count=None):
    per = np.asarray(values, dtype=float)
    return LogLikelihoodReport(
        float(math.fsum(per)), per, tuple(h.system_id for h in d.systems), method, node_count
    )


@dataclass(frozen=True)
class _Packed:
    """All systems' gaps laid end to end: event gaps then the tail, per system."""

    lo: np.ndarray
    hi: np.ndarray
    is_event: np.ndarray
    gap_system: np.ndarray
    seg_starts: np.ndarray
    event_times: np.ndarray
    event_system: np.ndarray
    n_events: np.ndarray
    covariates: np.ndarray | None


def packed(d) -> _Packed:
    cached = getattr(d, "_packed_cache", None)
    if cached is not None:
        return cached
    lo, hi, ev, gs, es, starts, counts = [], [], [], [], [], [], []
    pos = 0
    for i, h in enumerate(d.systems):
        b = np.concatenate([[0.0], h.times, [h.censor_time]])
        lo.append(b[:-1])
        hi.append(b[1:])
        flag = np.ones(b.size - 1, dtype=bool)
        flag[-1] = False
        ev.append(flag)
        gs.append(np.full(b.size - 1, i))
        es.append(np.full(h.n_events, i))
        starts.append(pos)
        pos += b.size - 1
        counts.append(h.n_events)
    cov = None
    if d.covariate_dim:
        cov = np.vstack([h.covariates for h in d.systems])
    out = _Packed(
        np.concatenate(lo), np.concatenate(hi), np.concatenate(ev), np.concatenate(gs),
        np.array(starts), np.concatenate([h.times for h in d.systems]), np.concatenate(es),
        np.array(counts), cov,
    )
    object.__setattr__(d, "_packed_cache", out)
    return out


def _log_multipliers(spec, d, pk) -> np.ndarray:
    if spec.beta is None or len(spec.beta) == 0:
        return np.zeros(len(d))
    if pk.covariates is None or pk.covariates.shape[1] != len(spec.beta):
        # defer to the per-system check for a precise message
        for h in d.systems:
            spec.covariate_log_multiplier(h)
    return pk.covariates @ np.asarray(spec.beta, dtype=float)


def _trp_terms(spec: TRPModel, d):
    """Vectorized ``(sum log gamma, int gamma)`` per system for a frailty-free TRP."""
    pk = packed(d)
    m = len(d)
    c = _log_multipliers(spec, d, pk)
    lam_lo = np.asarray(spec.trend.cumulative(pk.lo), dtype=float)
    lam_hi = np.asarray(spec.trend.cumulative(pk.hi), dtype=float)
    dl = lam_hi - lam_lo
    F = spec.renewal
    logs = np.bincount(pk.gap_system[pk.is_event], np.asarray(F.loghazard(dl[pk.is_event]), dtype=float), m)
    logs += np.bincount(pk.event_system, np.asarray(spec.trend.log_rate(pk.event_times), dtype=float), m)
    cum = np.bincount(pk.gap_system, np.asarray(F.cumhaz(dl), dtype=float), m)
    return logs + pk.n_events * c, np.exp(c) * cum


def _effects_for(effects, h):
    if effects is None:
        return None
    return effects.get(h.system_id)


def system_terms(spec: Model, h, effects=None):
    """``(sum log gamma(T_i), int_0^tau gamma)`` for one system, frailty excluded."""
    c = spec.covariate_log_multiplier(h)
    logs = spec.log_intensity_at_events(h, effects)
    inc = spec.compensator_increments(h, effects)
    return float(np.sum(logs)) + h.n_events * c, math.exp(c) * float(np.sum(inc))


def loglik(spec: Model, data, effects=None, *, form="hazard", node_count=8) -> LogLikelihoodReport:
    """Log-likelihood of ``data`` under ``spec``.

    Frailty-free specs are evaluated directly.  Frailty specs are dispatched
    to :func:`loglik_gamma_frailty` or :func:`loglik_htrp`.

    Parameters
    ----------
    spec : Model
    data : EventDataset or SystemHistory
    effects : dict, optional
        Realized repair effects per system id, overriding those read from marks.
    form : {"hazard", "density"}
        For TRP models, evaluate with hazards and cumulative hazards or with
        the density of each transformed gap and the survival of the tail.
    """
    d = as_dataset(data)
    if not spec.frailty.is_degenerate:
        if spec.multiplicative:
            return loglik_gamma_frailty(spec, d, effects=effects)
        return loglik_htrp(spec, d, node_count=node_count)
    if form == "density":
        if not isinstance(spec, TRPModel):
            raise DomainError("the density form applies to trend-renewal models only")
        return _report([_trp_density_form(spec, h) for h in d.systems], d)
    if isinstance(spec, TRPModel) and len(d):
        logs, cum = _trp_terms(spec, d)
        return _report(logs - cum, d)
    out = []
    for h in d.systems:
        s, cum = system_terms(spec, h, _effects_for(effects, h))
        out.append(s - cum)
    return _report(out, d)


def _trp_density_form(spec: TRPModel, h) -> float:
    c = spec.covariate_log_multiplier(h)
    dl = spec.transformed_gaps(h)
    F = spec.renewal
    if c != 0.0:
        g = math.exp(c)
        val = h.n_events * c + float(np.sum(F.loghazard(dl[:-1]))) - g * float(np.sum(F.cumhaz(dl)))
    else:
        val = float(np.sum(F.logpdf(dl[:-1]))) + float(F.logsf(dl[-1]))
    return val + float(np.sum(spec.trend.log_rate(h.times)))


def gamma_frailty_system(log_sum: float, cum: float, n: int, delta: float) -> float:
    """Marginal log-likelihood of one system with multiplicative gamma frailty.

    ``log_sum`` is ``sum log gamma(T_i)`` and ``cum`` is ``int gamma``.
    """
    k = np.arange(1, n)
    return log_sum + float(np.sum(np.log1p(k * delta))) - (n + 1.0 / delta) * math.log1p(delta * cum)


def loglik_gamma_frailty(spec: Model, data, delta=None, effects=None) -> LogLikelihoodReport:
    """Log-likelihood with a mean-one gamma frailty multiplying the intensity.

    Evaluates ``prod_i gamma(T_i) * prod_{k<n}(1 + k delta) /
    (1 + delta int gamma)^(n + 1/delta)`` in log space.
    """
    if isinstance(spec, TRPModel) and not isinstance(spec.renewal, Exponential):
        raise DomainError("frailty enters TRP non-multiplicatively; use loglik_htrp")
    if delta is None:
        delta = spec.frailty.variance
    delta = float(delta)
    if not delta > 0:
        raise DomainError(f"frailty variance must be positive, got {delta!r}")
    d = as_dataset(data)
    base = spec.without_frailty()
    if isinstance(base, TRPModel) and len(d):
        logs, cum = _trp_terms(base, d)
        pk = packed(d)
        # sum_{k<n} log(1 + k delta) via a cumulative table
        table = np.concatenate([[0.0], np.cumsum(np.log1p(delta * np.arange(1, max(pk.n_events.max(), 1))))])
        extra = table[np.maximum(pk.n_events - 1, 0)]
        out = logs + extra - (pk.n_events + 1.0 / delta) * np.log1p(delta * cum)
        return _report(out, d)
    out = []
    for h in d.systems:
        s, cum = system_terms(base, h, _effects_for(effects, h))
        out.append(gamma_frailty_system(s, cum, h.n_events, delta))
    return _report(out, d)


def htrp_log_integrand(spec: TRPModel, h, nodes) -> np.ndarray:
    """Conditional log-likelihood of one system given frailty ``a`` for each node."""
    nodes = np.asarray(nodes, dtype=float)
    dl = spec.transformed_gaps(h)
    F = spec.renewal
    c = spec.covariate_log_multiplier(h)
    x = np.outer(nodes, dl)  # (K, n+1)
    n = h.n_events
    loga = np.log(nodes)
    if c == 0.0:
        val = np.sum(np.asarray(F.logpdf(x[:, :-1])).reshape(len(nodes), n), axis=1)
        val = val + np.asarray(F.logsf(x[:, -1]))
    else:
        g = math.exp(c)
        val = n * c + np.sum(np.asarray(F.loghazard(x[:, :-1])).reshape(len(nodes), n), axis=1)
        val = val - g * np.sum(np.asarray(F.cumhaz(x)).reshape(len(nodes), n + 1), axis=1)
    if n:
        val = val + n * loga  # skipped when n = 0 so that a = 0 stays finite
    return val + float(np.sum(spec.trend.log_rate(h.times)))


def _htrp_at(spec, d, delta, count):
    """Per-system HTRP log-likelihood with a ``count``-node rule, all systems at once."""
    nodes, weights = frailty_quadrature(GammaFrailty(delta), count)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)  # far-tail weights underflow to zero
    pk = packed(d)
    c = _log_multipliers(spec, d, pk)
    dl = np.asarray(spec.trend.cumulative(pk.hi), dtype=float) - np.asarray(spec.trend.cumulative(pk.lo), dtype=float)
    x = np.outer(nodes, dl)  # (K, gaps)
    F = spec.renewal
    ev = pk.is_event
    if not np.any(c):
        terms = np.empty_like(x)
        terms[:, ev] = F.logpdf(x[:, ev])
        terms[:, ~ev] = F.logsf(x[:, ~ev])
    else:
        g = np.exp(c)[pk.gap_system]
        terms = -g * np.asarray(F.cumhaz(x))
        terms[:, ev] += np.asarray(F.loghazard(x[:, ev])) + c[pk.gap_system[ev]]
    per = np.add.reduceat(terms, pk.seg_starts, axis=1)  # (K, m)
    per += np.outer(np.log(nodes), pk.n_events)
    per += np.bincount(pk.event_system, np.asarray(spec.trend.log_rate(pk.event_times), dtype=float), len(d))
    return logsumexp(per + logw[:, None], axis=0)


def htrp_adaptive_system(spec: TRPModel, h, delta: float, rtol: float = 1e-12, moment: int = 0):
    """One system's HTRP log-likelihood by adaptive integration over ``u = log a``.

    In ``u`` every power of ``a`` becomes an exponential, so the integrand is
    smooth even where the gamma-weighted Gauss rule sees a branch point at
    ``a = 0``.  ``moment = m`` weights the integrand by ``a**m``.

    Returns
    -------
    value, relerr : float
        Log of the integral and the relative error estimate of the integral.
    """
    k = 1.0 / delta
    const = -k * math.log(delta) - float(gammaln(k))

    def g(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            a = np.exp(u)
            val = htrp_log_integrand(spec, h, a) + (k + moment) * u - a / delta + const
        return np.where(np.isnan(val), -np.inf, val)

    grid = np.linspace(-60.0, 30.0, 901)
    vals = g(grid)
    i = int(np.argmax(vals))
    if not np.isfinite(vals[i]):
        return -math.inf, math.inf
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda u: -float(g(u)[0]), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    mode = float(res.x) if -res.fun >= vals[i] else float(grid[i])
    top = float(g(mode)[0])

    def f(u):
        return math.exp(float(g(u)[0]) - top)

    total, err = 0.0, 0.0
    for a, b in ((-np.inf, mode), (mode, np.inf)):
        val, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=400)
        total, err = total + val, err + e
    if not total > 0:
        return -math.inf, math.inf
    return top + math.log(total), err / total


def loglik_htrp(spec: TRPModel, data, delta=None, node_count=8, *, tol=1e-8, cap=512, strict=True,
                fallback=True):
    """HTRP log-likelihood, ``E_a`` of the trend-scaled TRP likelihood.

    The expectation over the gamma frailty uses the matching Gauss rule,
    doubled from ``node_count`` until the total moves by less than ``tol``.
    The rule converges only algebraically when the integrand carries
    non-integer powers of ``a`` (Weibull or gamma renewal laws); when the cap
    is reached, ``fallback`` switches to adaptive integration over ``log a``.

    Parameters
    ----------
    strict : bool
        Raise when no method meets ``tol``; otherwise return the capped
        Gauss-rule estimate.
    fallback : bool
        Try adaptive integration before giving up at the cap.

    Raises
    ------
    QuadratureError
        If ``strict`` and neither the Gauss rule nor the fallback converges;
        carries the best estimate and the last gap.
    """
    if delta is None:
        delta = spec.frailty.variance
    delta = float(delta)
    if not delta > 0:
        raise DomainError(f"frailty variance must be positive, got {delta!r}")
    if node_count < 8:
        raise DomainError("node_count must be at least 8")
    d = as_dataset(data)
    base = spec.without_frailty()
    n = int(node_count)
    cur = _htrp_at(base, d, delta, n)
    gap = math.inf
    while 2 * n <= cap:
        nxt = _htrp_at(base, d, delta, 2 * n)
        gap = abs(math.fsum(nxt) - math.fsum(cur))
        if gap < tol:
            return _report(cur, d, "quadrature", n)
        n *= 2
        cur = nxt
    if fallback:
        per, errs = zip(*(htrp_adaptive_system(base, h, delta) for h in d.systems))
        # relative errors on each integral are absolute errors on its log
        if math.fsum(errs) < tol:
            return _report(per, d, "adaptive-quadrature")
    if strict:
        raise QuadratureError(
            f"frailty quadrature did not converge by {n} nodes (gap {gap:.3g})",
            float(math.fsum(cur)),
            gap,
        )
    return _report(cur, d, "quadrature", n)


def _log_rising(x: float, m: float) -> float:
    """``log Gamma(x + m) - log Gamma(x)``, accurate for large ``x``."""
    if x < 1e4:
        return float(gammaln(x + m) - gammaln(x))
    # Stirling series difference
    y = x + m
    val = (x - 0.5) * math.log1p(m / x) + m * math.log(y) - m
    val += (1.0 / (12 * y) - 1.0 / (12 * x)) - (1.0 / (360 * y**3) - 1.0 / (360 * x**3))
    return val


def loglik_inhom_gamma_closed(gamma, trend, delta, data) -> LogLikelihoodReport:
    """HTRP with gamma renewal law, closed form for windows ending at events.

    Parameters
    ----------
    gamma : float
        Variance of the unit-mean gamma renewal distribution.
    trend : TrendFunction
    delta : float
        Frailty variance.
    data : EventDataset
        Every system's window must end at its last event.
    """
    gamma, delta = float(gamma), float(delta)
    if not (gamma > 0 and delta > 0):
        raise DomainError("gamma and delta must be positive")
    d = as_dataset(data)
    k = 1.0 / gamma
    out = []
    for h in d.systems:
        n = h.n_events
        if n == 0 or abs(h.censor_time - h.times[-1]) > 1e-12 * h.censor_time:
            raise DataError(f"system {h.system_id}: window must end at the last event for the closed form")
        cum = np.asarray(trend.cumulative(np.concatenate([[0.0], h.times])), dtype=float)
        dl = np.diff(cum)
        y = cum[-1] / gamma
        nk = n * k
        val = _log_rising(1.0 / delta, nk) + nk * math.log(delta) - (nk + 1.0 / delta) * math.log1p(delta * y)
        val += float(np.sum((k - 1.0) * np.log(dl) + np.asarray(trend.log_rate(h.times))))
        val -= nk * math.log(gamma) + n * float(gammaln(k))
        out.append(val)
    return _report(out, d)
