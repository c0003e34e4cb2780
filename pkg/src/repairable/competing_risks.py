"""Marked (multi-type) virtual-age processes.

A system of ``n`` components carries one virtual age per component.  Between
events every age grows with unit slope; at an event of type ``j`` the repair
policy updates the age vector.  Type-specific intensities ``nu_j(ages)``
come from an :class:`IntensityFamily`, either decomposed into per-component
hazards plus interaction terms or derived from a joint survival function
``R`` as ``nu_j = -d_j log R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .distributions import Exponential, Lifetime, RenewalDistribution
from .errors import DataError, DomainError, NumericalError, StarvedProcessError
from .events import EventDataset, SystemHistory, as_dataset
from .likelihood import LogLikelihoodReport
from .simulation import EVENT_STREAM, EFFECT_STREAM, stream, unit_exponentials

SIM_XTOL = 1e-10
MAX_MARKED_EVENTS = 1_000_000


@dataclass(frozen=True)
class ComponentSet:
    """Ordered, unique component labels ``C_1..C_n``."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            raise DomainError("a component set needs at least one label")
        if len(set(labels)) != len(labels):
            raise DomainError(f"duplicate component labels in {labels}")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise DataError(f"mark {label!r} is not a component of {self.labels}") from None

    def check(self, data) -> None:
        for h in as_dataset(data).systems:
            for k, m in enumerate(h.marks):
                if m not in self.labels:
                    raise DataError(f"system {h.system_id}, event {k + 1}: mark {m!r} outside {self.labels}")

    @classmethod
    def of(cls, n_or_labels) -> "ComponentSet":
        if isinstance(n_or_labels, ComponentSet):
            return n_or_labels
        if isinstance(n_or_labels, int):
            return cls(tuple(str(i + 1) for i in range(n_or_labels)))
        return cls(tuple(n_or_labels))


# --------------------------------------------------------------------------
# vector virtual-age policies


@dataclass(frozen=True)
class VectorAgeState:
    ages: np.ndarray
    last_event: float


@dataclass(frozen=True)
class MultiVirtualAgePolicy:
    """Update rule for the vector of post-repair ages.

    ``kind`` is one of ``"perfect-all"``, ``"minimal-all"``, ``"partial"``,
    ``"age-reduction-full"``, ``"age-reduction-increment"`` or
    ``"equal-age-two-type"``; ``rho`` holds one factor per component.
    """

    kind: str
    rho: tuple = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in _POLICY_KINDS:
            raise DomainError(f"unknown policy {self.kind!r}; expected one of {sorted(_POLICY_KINDS)}")
        rho = tuple(float(r) for r in self.rho)
        if any(not 0.0 < r < 1.0 for r in rho):
            raise DomainError(f"every rho must lie in (0, 1), got {rho}")
        if self.kind in _RHO_KINDS and not rho:
            raise DomainError(f"policy {self.kind!r} needs rho")
        object.__setattr__(self, "rho", rho)

    def _rho(self, j, n):
        if len(self.rho) == 1:
            return self.rho[0]
        if len(self.rho) != n:
            raise DomainError(f"{len(self.rho)} rho values for {n} components")
        return self.rho[j]

    def update(self, v: np.ndarray, x: float, j: int) -> np.ndarray:
        """Post-repair ages after an event of type ``j`` ``x`` after the last one."""
        n = v.size
        a = v + x
        k = self.kind
        if k == "perfect-all":
            return np.zeros(n)
        if k == "minimal-all":
            return a
        if k == "partial":
            a[j] = 0.0
            return a
        r = self._rho(j, n)
        if k == "age-reduction-full":
            a[j] = (1.0 - r) * a[j]
            return a
        if k == "age-reduction-increment":
            return np.full(n, v[0] + (1.0 - r) * x)
        # equal-age-two-type: one shared age reduced by the failing type's factor
        return np.full(n, (1.0 - r) * (v[0] + x))

    def check(self, components: ComponentSet) -> None:
        if self.kind == "equal-age-two-type" and len(components) != 2:
            raise DomainError("equal-age-two-type needs exactly two components")
        if self.rho and len(self.rho) not in (1, len(components)):
            raise DomainError(f"{len(self.rho)} rho values for {len(components)} components")


_POLICY_KINDS = {
    "perfect-all", "minimal-all", "partial", "age-reduction-full",
    "age-reduction-increment", "equal-age-two-type",
}
_RHO_KINDS = {"age-reduction-full", "age-reduction-increment", "equal-age-two-type"}


def PerfectAll() -> MultiVirtualAgePolicy:
    return MultiVirtualAgePolicy("perfect-all")


def MinimalAll() -> MultiVirtualAgePolicy:
    return MultiVirtualAgePolicy("minimal-all")


def PartialRepair() -> MultiVirtualAgePolicy:
    """Only the failing component is renewed."""
    return MultiVirtualAgePolicy("partial")


def AgeReductionFull(rho) -> MultiVirtualAgePolicy:
    """Failing component's age shrinks by ``1 - rho_j``; the others keep aging."""
    return MultiVirtualAgePolicy(
        "age-reduction-full", tuple(np.atleast_1d(rho)),
        {"age-reduction-full": "per-component extension: only the failing component's age is reduced"},
    )


def AgeReductionIncrement(rho) -> MultiVirtualAgePolicy:
    """Shared age ``v(i) = v(i-1) + (1 - rho_J) X_i``."""
    return MultiVirtualAgePolicy("age-reduction-increment", tuple(np.atleast_1d(rho)))


def EqualAgeTwoType(rho) -> MultiVirtualAgePolicy:
    """Shared age ``v(i) = (1 - rho_J)(v(i-1) + X_i)`` for two event types."""
    return MultiVirtualAgePolicy("equal-age-two-type", tuple(np.atleast_1d(rho)))


def multi_policy_from_name(name: str, rho=None) -> MultiVirtualAgePolicy:
    key = name.lower().replace("_", "-")
    aliases = {"perfect": "perfect-all", "minimal": "minimal-all", "partial-repair": "partial"}
    key = aliases.get(key, key)
    if key in _RHO_KINDS:
        if rho is None:
            raise DomainError(f"policy {name!r} needs rho")
        return {"age-reduction-full": AgeReductionFull, "age-reduction-increment": AgeReductionIncrement,
                "equal-age-two-type": EqualAgeTwoType}[key](rho)
    if rho is not None:
        raise DomainError(f"policy {name!r} takes no rho")
    return MultiVirtualAgePolicy(key)


def post_event_ages(policy, history: SystemHistory, components) -> np.ndarray:
    """``(n_events + 1, n)`` array of ages right after each event (row 0 is the start)."""
    comps = ComponentSet.of(components)
    policy.check(comps)
    n = len(comps)
    x = history.interevent_times()
    out = np.zeros((x.size + 1, n))
    v = np.zeros(n)
    for i in range(x.size):
        v = policy.update(v.copy(), float(x[i]), comps.index(history.marks[i]))
        out[i + 1] = v
    return out


def vector_virtual_age(policy, history: SystemHistory, t: float, components) -> VectorAgeState:
    """Ages ``A_j(t) = v_j(N(t-)) + t - T_{N(t-)}``."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t!r}")
    k = int(np.searchsorted(history.times, t, side="left"))
    v = post_event_ages(policy, history.with_times(history.times[:k], history.marks[:k]), components)[-1]
    last = float(history.times[k - 1]) if k else 0.0
    return VectorAgeState(v + (t - last), last)


# --------------------------------------------------------------------------
# intensity families


class IntensityFamily:
    """Type-specific intensities ``nu_j(v_1..v_n)``.

    Subclasses implement :meth:`_nu` on an ``(..., n)`` array.  The default
    :meth:`integrated` uses adaptive quadrature along ``v + u 1``.
    """

    n: int = 1
    metadata: dict = {}

    def _nu(self, ages: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def nu(self, ages) -> np.ndarray:
        a = np.asarray(ages, dtype=float)
        if a.shape[-1] != self.n:
            raise DomainError(f"expected {self.n} ages, got {a.shape[-1]}")
        if np.any(a < 0):
            raise DomainError("ages must be nonnegative")
        out = np.asarray(self._nu(a), dtype=float)
        if np.any(out < 0):
            raise DomainError("negative type-specific intensity: not a valid rate at these ages")
        if np.any(np.isnan(out)):
            raise NumericalError("type-specific intensity is undefined at these ages")
        return out

    def integrated(self, v, x: float) -> np.ndarray:
        """``int_0^x nu_j(v + u 1) du`` for each ``j``."""
        v = np.asarray(v, dtype=float)
        if x <= 0:
            return np.zeros(self.n)
        out = np.empty(self.n)
        for j in range(self.n):
            val, _ = integrate.quad(lambda u: self.nu(v + u)[j], 0.0, x, epsabs=1e-13, epsrel=1e-11, limit=200)
            out[j] = val
        return out

    def permuted(self, perm) -> "IntensityFamily":
        return _Permuted(self, tuple(perm))


@dataclass(frozen=True)
class _Permuted(IntensityFamily):
    base: IntensityFamily
    perm: tuple

    @property
    def n(self):
        return self.base.n

    def _nu(self, ages):
        inv = np.argsort(self.perm)
        return self.base._nu(ages[..., inv])[..., self.perm]

    def integrated(self, v, x):
        inv = np.argsort(self.perm)
        return self.base.integrated(np.asarray(v)[inv], x)[list(self.perm)]


def _as_lifetime(law) -> Lifetime:
    if isinstance(law, Lifetime):
        return law
    if isinstance(law, RenewalDistribution):
        return Lifetime(law)
    raise DomainError(f"expected a Lifetime or RenewalDistribution, got {type(law).__name__}")


class IndependentComponents(IntensityFamily):
    """``R = prod_j R_j(v_j)``; ``nu_j = z_j(v_j)``."""

    def __init__(self, lifetimes: Sequence):
        self.lifetimes = tuple(_as_lifetime(x) for x in lifetimes)
        if not self.lifetimes:
            raise DomainError("need at least one component lifetime")
        self.n = len(self.lifetimes)
        self.metadata = {}

    @classmethod
    def exponential(cls, rates) -> "IndependentComponents":
        return cls([Lifetime(Exponential(), float(r)) for r in rates])

    def _nu(self, ages):
        return np.stack([np.asarray(L.hazard(ages[..., j]), dtype=float) for j, L in enumerate(self.lifetimes)], axis=-1)

    def integrated(self, v, x):
        v = np.asarray(v, dtype=float)
        return np.array([float(L.cumhaz(v[j] + x)) - float(L.cumhaz(v[j])) for j, L in enumerate(self.lifetimes)])

    def log_survival(self, ages):
        a = np.asarray(ages, dtype=float)
        return -sum(np.asarray(L.cumhaz(a[..., j])) for j, L in enumerate(self.lifetimes))

    def permuted(self, perm):
        return IndependentComponents([self.lifetimes[p] for p in perm])


class GumbelBivariateExponential(IntensityFamily):
    """``R(v1, v2) = exp(-v1 - v2 - theta v1 v2)``, ``0 <= theta <= 1``."""

    n = 2

    def __init__(self, theta: float):
        theta = float(theta)
        if not 0.0 <= theta <= 1.0:
            raise DomainError(f"theta must lie in [0, 1], got {theta!r}")
        self.theta = theta
        self.metadata = {}

    def _nu(self, ages):
        return 1.0 + self.theta * ages[..., ::-1]

    def integrated(self, v, x):
        v = np.asarray(v, dtype=float)
        if x <= 0:
            return np.zeros(2)
        return x + self.theta * (v[::-1] * x + 0.5 * x * x)

    def log_survival(self, ages):
        a = np.asarray(ages, dtype=float)
        return -a[..., 0] - a[..., 1] - self.theta * a[..., 0] * a[..., 1]

    def permuted(self, perm):
        return self


class SurvivalDerived(IntensityFamily):
    """``nu_j = -d_j log R`` by central finite differences of a user ``log R``.

    The step is ``1e-6 (1 + |v_j|)``; results carry finite-difference error
    of roughly that order relative to the curvature of ``log R``.
    """

    def __init__(self, log_survival: Callable, n: int, step: float = 1e-6):
        self.log_survival = log_survival
        self.n = int(n)
        self.step = float(step)
        self.metadata = {"nu": f"central finite differences of log R, step {step:g}*(1+|v|)"}

    def _nu(self, ages):
        a = np.atleast_2d(ages)
        out = np.empty(a.shape)
        for j in range(self.n):
            h = self.step * (1.0 + np.abs(a[..., j]))
            lo = np.maximum(a[..., j] - h, 0.0)
            hi = a[..., j] + h
            up, dn = a.copy(), a.copy()
            up[..., j] = hi
            dn[..., j] = lo
            fu = np.array([self.log_survival(r) for r in up.reshape(-1, self.n)]).reshape(a.shape[:-1])
            fd = np.array([self.log_survival(r) for r in dn.reshape(-1, self.n)]).reshape(a.shape[:-1])
            out[..., j] = -(fu - fd) / (hi - lo)
        return out.reshape(np.shape(ages))


class Decomposed(IntensityFamily):
    """``nu_j = lambda_j(v_j) + lambda_j*(v_1..v_n)``.

    Parameters
    ----------
    hazards : sequence
        Lifetimes, renewal laws, or callables ``lambda_j(v)``.
    interactions : sequence of callable or None, optional
        ``lambda_j*(ages)``; should vanish when every age but the ``j``-th
        is zero.  Negative values are allowed as long as ``nu_j`` stays
        nonnegative where evaluated.
    """

    def __init__(self, hazards: Sequence, interactions: Sequence | None = None):
        self.hazards = tuple(_as_lifetime(h) if isinstance(h, RenewalDistribution) else h for h in hazards)
        self.n = len(self.hazards)
        if interactions is not None and len(interactions) != self.n:
            raise DomainError(f"{len(interactions)} interaction terms for {self.n} components")
        self.interactions = tuple(interactions) if interactions is not None else (None,) * self.n
        self.metadata = {}

    def _nu(self, ages):
        cols = []
        for j, h in enumerate(self.hazards):
            f = h.hazard if isinstance(h, Lifetime) else h
            val = np.asarray(f(ages[..., j]), dtype=float)
            if self.interactions[j] is not None:
                val = val + np.asarray(self.interactions[j](ages), dtype=float)
            cols.append(np.broadcast_to(val, ages.shape[:-1]))
        return np.stack(cols, axis=-1)

    def integrated(self, v, x):
        if all(isinstance(h, Lifetime) for h in self.hazards) and all(i is None for i in self.interactions):
            return IndependentComponents(self.hazards).integrated(v, x)
        return super().integrated(v, x)


def type_intensity(family: IntensityFamily, ages) -> np.ndarray:
    return family.nu(ages)


def type_specific_hazard(family: IntensityFamily, t) -> np.ndarray:
    """``h_j(t) = nu_j(t, .., t)``; returns shape ``t.shape + (n,)``."""
    t = np.asarray(t, dtype=float)
    return family.nu(np.repeat(t[..., None], family.n, axis=-1))


# --------------------------------------------------------------------------
# simulation


def _next_gap(family, v, e, remaining):
    """Solve ``sum_j int_0^x nu_j(v + u) du = e`` for ``x`` within ``remaining``."""

    def phi(x):
        return float(np.sum(family.integrated(v, x)))

    total = phi(remaining)
    if not math.isfinite(total):
        raise StarvedProcessError("total intensity is not integrable over the remaining window")
    if total < e:
        return None
    rate0 = float(np.sum(family.nu(v)))
    hi = min(1.0 / rate0 if rate0 > 0 else remaining / 16.0, remaining)
    lo = 0.0
    while phi(hi) < e:
        lo, hi = hi, min(2.0 * hi, remaining)
    return optimize.brentq(lambda x: phi(x) - e, lo, hi, xtol=SIM_XTOL, rtol=1e-14)


def simulate_marked(policy, family: IntensityFamily, tau: float, seed: int, index: int = 0,
                    components=None, system_id=None) -> SystemHistory:
    """Simulate one marked history on ``(0, tau]`` by inverting the total compensator."""
    comps = ComponentSet.of(family.n if components is None else components)
    if len(comps) != family.n:
        raise DomainError(f"{len(comps)} components for a {family.n}-type family")
    policy.check(comps)
    tau = float(tau)
    if not tau > 0:
        raise DomainError("tau must be positive")
    rng_e = stream(seed, index, EVENT_STREAM)
    rng_m = stream(seed, index, EFFECT_STREAM)
    v = np.zeros(family.n)
    t = 0.0
    times, marks = [], []
    if float(np.sum(family.integrated(v, tau))) == 0.0:
        raise StarvedProcessError("total intensity is zero over the whole window")
    while True:
        e = float(unit_exponentials(rng_e, 1)[0])
        x = _next_gap(family, v, e, tau - t)
        if x is None:
            break
        nu = family.nu(v + x)
        tot = float(np.sum(nu))
        if not tot > 0:
            raise StarvedProcessError(f"zero total intensity at the event instant t={t + x!r}")
        j = int(np.searchsorted(np.cumsum(nu) / tot, rng_m.random(), side="right"))
        j = min(j, family.n - 1)
        t_new = t + x
        if t_new <= t:
            raise NumericalError("marked simulation lost resolution: zero gap")
        t = t_new
        times.append(t)
        marks.append(comps.labels[j])
        v = policy.update(v.copy(), x, j)
        if len(times) > MAX_MARKED_EVENTS:
            raise NumericalError("explosive configuration: more than 1e6 marked events in one window")
    sid = system_id or f"s{index + 1}"
    return SystemHistory(sid, times, tau, marks)


def simulate_marked_dataset(policy, family, n_systems: int, tau, seed: int, components=None,
                            id_prefix="s") -> EventDataset:
    taus = np.broadcast_to(np.asarray(tau, dtype=float), (int(n_systems),))
    return EventDataset([
        simulate_marked(policy, family, float(taus[i]), seed, i, components, f"{id_prefix}{i + 1}")
        for i in range(int(n_systems))
    ])


# --------------------------------------------------------------------------
# likelihood


def _system_parts(policy, family, h, comps):
    """``(sum log nu_J at events, per-type integrated intensity, per-type counts)``."""
    x = np.concatenate([h.interevent_times(), [h.tail()]])
    v = np.zeros(family.n)
    lognu = 0.0
    cum = np.zeros(family.n)
    counts = np.zeros(family.n, dtype=int)
    for i in range(x.size):
        cum += family.integrated(v, float(x[i]))
        if i == h.n_events:
            break
        j = comps.index(h.marks[i])
        nu = family.nu(v + x[i])[j]
        if nu <= 0:
            return -math.inf, cum, counts
        lognu += math.log(nu)
        counts[j] += 1
        v = policy.update(v.copy(), float(x[i]), j)
    return lognu, cum, counts


def _prep(policy, family, data, components):
    d = as_dataset(data)
    comps = ComponentSet.of(family.n if components is None else components)
    if len(comps) != family.n:
        raise DomainError(f"{len(comps)} components for a {family.n}-type family")
    comps.check(d)
    policy.check(comps)
    return d, comps


def marked_loglik(policy, family: IntensityFamily, data, components=None) -> LogLikelihoodReport:
    """``sum_i log nu_{J_i}(A(T_i)) - sum_j int_0^tau nu_j(A(u)) du`` per system."""
    d, comps = _prep(policy, family, data, components)
    per = []
    for h in d.systems:
        lognu, cum, _ = _system_parts(policy, family, h, comps)
        per.append(lognu - float(np.sum(cum)))
    per = np.array(per)
    return LogLikelihoodReport(float(np.sum(per)), per, tuple(h.system_id for h in d.systems), "marked")


def _gamma_factor(n, cum, delta):
    if delta == 0.0:
        return -cum
    k = np.arange(n)
    return float(np.sum(np.log1p(k * delta))) - (n + 1.0 / delta) * math.log1p(delta * cum)


def marked_loglik_frailty(policy, family: IntensityFamily, data, deltas, components=None) -> LogLikelihoodReport:
    """Marked log-likelihood with independent mean-one gamma frailties per type.

    ``deltas`` holds one variance per type (zero means no frailty); type
    ``j`` intensity is multiplied by ``a_j ~ Gamma(1/delta_j, delta_j)``.
    """
    d, comps = _prep(policy, family, data, components)
    deltas = np.broadcast_to(np.asarray(deltas, dtype=float), (family.n,))
    if np.any(deltas < 0) or not np.all(np.isfinite(deltas)):
        raise DomainError(f"frailty variances must be finite and nonnegative, got {deltas}")
    per = []
    for h in d.systems:
        lognu, cum, counts = _system_parts(policy, family, h, comps)
        per.append(lognu + sum(_gamma_factor(int(counts[j]), float(cum[j]), float(deltas[j])) for j in range(family.n)))
    per = np.array(per)
    return LogLikelihoodReport(float(np.sum(per)), per, tuple(h.system_id for h in d.systems), "marked-frailty")
