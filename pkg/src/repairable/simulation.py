"""Exact simulation of single-type models by inversion.

Every system draws from three independent Philox streams keyed by
``(seed, system index)`` with the stream number in the counter: one for the
frailty, one for the event uniforms and one for repair effects.  Results
therefore depend only on the plan, never on chunk sizes or scheduling, and
a Brown-Proschan policy with ``p = 1`` reproduces the perfect-repair path
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from . import _core
from .distributions import Exponential, Weibull
from .errors import DomainError, NumericalError
from .events import EventDataset, SystemHistory
from .models import LogLinearModulatedModel, Model, TRPModel, VirtualAgeModel
from .repair import AGE_RED_FULL, KIJIMA1, KIJIMA2, MINIMAL, PERFECT

MAX_EVENTS = 10_000_000
FRAILTY_STREAM, EVENT_STREAM, EFFECT_STREAM = 0, 1, 2
_MASK64 = (1 << 64) - 1


def stream(seed: int, system: int, which: int) -> Generator:
    """Counter-based generator for ``(seed, system, stream)``."""
    return Generator(Philox(key=[seed & _MASK64, system & _MASK64], counter=[0, 0, 0, which]))


def unit_exponentials(rng: Generator, size: int) -> np.ndarray:
    return -np.log1p(-rng.random(size))


@dataclass(frozen=True)
class SimulationPlan:
    """What to simulate.

    Parameters
    ----------
    spec : Model
    n_systems : int
    tau : float or sequence of float
        Window length, shared or per system.
    seed : int
        Nonnegative 64-bit base seed.
    covariates : array_like, optional
        ``(n_systems, p)`` fixed covariate matrix.
    id_prefix : str
        System ids are ``f"{id_prefix}{i+1}"``.
    """

    spec: Model
    n_systems: int
    tau: object
    seed: int
    covariates: object = None
    id_prefix: str = "s"

    def __post_init__(self):
        if int(self.n_systems) < 1:
            raise DomainError("n_systems must be at least 1")
        if not 0 <= int(self.seed) <= _MASK64:
            raise DomainError("seed must be a 64-bit nonnegative integer")
        taus = self.taus
        if np.any(~np.isfinite(taus)) or np.any(taus <= 0):
            raise DomainError("every window length must be finite and positive")

    @property
    def taus(self) -> np.ndarray:
        t = np.asarray(self.tau, dtype=float)
        if t.ndim == 0:
            return np.full(int(self.n_systems), float(t))
        if t.size != int(self.n_systems):
            raise DomainError(f"{t.size} window lengths for {self.n_systems} systems")
        return t


def trp_times_from_gaps(trend, gaps, a: float = 1.0) -> np.ndarray:
    """Event times ``Lambda^{-1}(sum_{k<=i} W_k / a)`` for transformed gaps ``W``."""
    s = np.cumsum(np.asarray(gaps, dtype=float)) / a
    out = np.full(s.shape, math.inf)
    ok = s < trend.supremum
    out[ok] = trend.inverse(s[ok])
    return out


def _chunk(expected: float, used: int) -> int:
    return int(min(max(16, 1.5 * expected + 10, used), 1 << 20))


def _simulate_trp(spec: TRPModel, tau, a, g, rng_e):
    expected = a * g * float(spec.trend.cumulative(tau))
    last = 0.0
    out = []
    total = 0
    while True:
        k = _chunk(expected, total)
        w = np.asarray(spec.renewal.cumhaz_inverse(unit_exponentials(rng_e, k) / g), dtype=float)
        s = last + np.cumsum(w) / a
        t = np.full(k, math.inf)
        ok = s < spec.trend.supremum
        t[ok] = spec.trend.inverse(s[ok])
        past = np.flatnonzero(t > tau)
        if past.size:
            out.append(t[: past[0]])
            break
        out.append(t)
        total += k
        if total > MAX_EVENTS:
            raise NumericalError("explosive configuration: more than 1e7 events in one window")
        last = s[-1]
    return np.concatenate(out)


def _format_effect(d: float) -> str:
    if d == 0.0:
        return "perfect"
    if d == 1.0:
        return "minimal"
    return repr(float(d))


def _simulate_va(spec: VirtualAgeModel, tau, m, rng_e, rng_d):
    life = spec.lifetime
    pol = spec.policy
    dist = life.dist
    c = life.rate
    if isinstance(dist, Exponential):
        shape, scale = 1.0, 1.0
    elif isinstance(dist, Weibull):
        shape, scale = dist.shape, dist.scale
    else:
        shape = None
    times, effects = [], []
    v, t, total = 0.0, 0.0, 0
    expected = 8.0 * m * c * tau
    while True:
        k = _chunk(expected, total)
        e = unit_exponentials(rng_e, k)
        d = pol.draw_effects(rng_d, k) if pol.needs_effects else pol.default_effects(k)
        if shape is not None:
            tt, used, v, t, done = _core.simulate_va_weibull(
                e, d, pol.kind, float(pol.rho), shape, scale, c, m, tau, v, t
            )
        else:
            tt, used, v, t, done = _va_generic(life, pol, e, d, m, tau, v, t)
        times.append(tt)
        effects.append(d[: tt.size])
        total += k
        if done:
            break
        if total > MAX_EVENTS:
            raise NumericalError("explosive configuration: more than 1e7 events in one window")
    times = np.concatenate(times)
    if times.size and np.any(np.diff(np.concatenate([[0.0], times])) <= 0):
        raise NumericalError("virtual-age simulation lost resolution: gaps underflow at this age")
    marks = None
    if pol.needs_effects:
        marks = [_format_effect(x) for x in np.concatenate(effects)]
    return times, marks


def _age_update(kind, v, x, d, rho):
    if kind == PERFECT:
        return 0.0
    if kind == MINIMAL:
        return v + x
    if kind == KIJIMA1:
        return v + d * x
    if kind == KIJIMA2:
        return d * (v + x)
    if kind == AGE_RED_FULL:
        return (1.0 - rho) * (v + x)
    return v + (1.0 - rho) * x


def _va_generic(life, pol, e, d, m, tau, v, t):
    """Scalar virtual-age loop for lifetimes without a compiled kernel."""
    times = []
    for i in range(e.size):
        age = float(life.cumhaz_inverse(float(life.cumhaz(v)) + e[i] / m))
        x = age - v
        t_new = t + x
        if t_new > tau:
            return np.array(times), i + 1, v, t, True
        times.append(t_new)
        t = t_new
        v = _age_update(pol.kind, v, x, d[i], float(pol.rho))
    return np.array(times), e.size, v, t, False


def _simulate_llm(spec: LogLinearModulatedModel, tau, m, rng_e):
    times = []
    t = 0.0
    while True:
        e = unit_exponentials(rng_e, 64)
        for x in e:
            gap = spec.interval_inverse(t, x / m)
            if t + gap > tau:
                return np.array(times)
            t = t + gap
            times.append(t)
        if len(times) > MAX_EVENTS:
            raise NumericalError("explosive configuration: more than 1e7 events in one window")


def simulate_system(spec: Model, tau: float, seed: int, index: int, system_id=None, covariates=None):
    """Simulate one system's history on ``(0, tau]``."""
    rng_f = stream(seed, index, FRAILTY_STREAM)
    rng_e = stream(seed, index, EVENT_STREAM)
    rng_d = stream(seed, index, EFFECT_STREAM)
    a = 1.0 if spec.frailty.is_degenerate else float(spec.frailty.sample(rng_f))
    sid = system_id or f"s{index + 1}"
    probe = SystemHistory(sid, [], tau, covariates=covariates)
    g = math.exp(spec.covariate_log_multiplier(probe))
    marks = None
    if isinstance(spec, TRPModel):
        times = _simulate_trp(spec, tau, a, g, rng_e)
    elif isinstance(spec, VirtualAgeModel):
        times, marks = _simulate_va(spec, tau, a * g, rng_e, rng_d)
    elif isinstance(spec, LogLinearModulatedModel):
        times = _simulate_llm(spec, tau, a * g, rng_e)
    else:
        raise DomainError(f"cannot simulate {type(spec).__name__}")
    return SystemHistory(sid, times, tau, marks, covariates)


def simulate(plan: SimulationPlan) -> EventDataset:
    """Simulate every system of ``plan``; returns a validated dataset."""
    taus = plan.taus
    cov = None if plan.covariates is None else np.atleast_2d(np.asarray(plan.covariates, dtype=float))
    if cov is not None and cov.shape[0] != plan.n_systems:
        raise DomainError(f"{cov.shape[0]} covariate rows for {plan.n_systems} systems")
    systems = [
        simulate_system(
            plan.spec,
            float(taus[i]),
            int(plan.seed),
            i,
            f"{plan.id_prefix}{i + 1}",
            None if cov is None else cov[i],
        )
        for i in range(int(plan.n_systems))
    ]
    return EventDataset(systems)
