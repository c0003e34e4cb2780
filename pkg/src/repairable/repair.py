"""Imperfect-repair policies for scalar virtual-age models.

A policy maps gaps ``X_i`` and repair effects ``D_i`` to post-repair ages
``v(i)``; between events the virtual age grows with unit slope,
``A(t) = v(N(t-)) + t - T_{N(t-)}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _core
from .errors import DataError, DomainError

PERFECT, MINIMAL, KIJIMA1, KIJIMA2, AGE_RED_FULL, AGE_RED_INCR = range(6)

# marks understood as repair effects
EFFECT_MARKS = {"perfect": 0.0, "minimal": 1.0}


# --------------------------------------------------------------------------
# laws of the repair effect D in [0, 1]


class DLaw:
    deterministic = False

    def sample(self, rng, size):
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(DLaw):
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"repair effect must lie in [0, 1], got {self.value!r}")

    @property
    def deterministic(self):
        return True

    def sample(self, rng, size):
        return np.full(size, float(self.value))


@dataclass(frozen=True)
class BernoulliComplement(DLaw):
    """``D = 0`` (perfect repair) with probability ``p``, else ``D = 1``."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"probability must lie in [0, 1], got {self.p!r}")

    @property
    def deterministic(self):
        return self.p in (0.0, 1.0)

    def sample(self, rng, size):
        if rng is None and self.deterministic:
            return np.full(size, 0.0 if self.p == 1.0 else 1.0)
        return (rng.random(size) >= self.p).astype(float)


@dataclass(frozen=True)
class UniformD(DLaw):
    def sample(self, rng, size):
        return rng.random(size)


@dataclass(frozen=True)
class BetaD(DLaw):
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("Beta repair-effect parameters must be positive")

    def sample(self, rng, size):
        return rng.beta(self.a, self.b, size)


# --------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class VirtualAgePolicy:
    """Base class; ``kind`` indexes the recursion in the compiled kernels."""

    kind = -1

    @property
    def rho(self) -> float:
        return 0.0

    @property
    def dlaw(self) -> DLaw:
        return PointMass(0.0)

    @property
    def needs_effects(self) -> bool:
        """Whether realized ``D_i`` must be observed for likelihood use."""
        return self.kind in (KIJIMA1, KIJIMA2) and not self.dlaw.deterministic

    def draw_effects(self, rng, size):
        return self.dlaw.sample(rng, size)

    def default_effects(self, size):
        if self.needs_effects:
            raise DataError("repair effects D_i are random under this policy and must be supplied")
        return self.dlaw.sample(None, size) if self.kind in (KIJIMA1, KIJIMA2) else np.zeros(size)

    @property
    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class Perfect(VirtualAgePolicy):
    kind = PERFECT


@dataclass(frozen=True)
class Minimal(VirtualAgePolicy):
    kind = MINIMAL


@dataclass(frozen=True)
class KijimaI(VirtualAgePolicy):
    """``v(i) = v(i-1) + D_i X_i``."""

    law: DLaw = PointMass(1.0)
    kind = KIJIMA1

    @property
    def dlaw(self):
        return self.law


@dataclass(frozen=True)
class KijimaII(VirtualAgePolicy):
    """``v(i) = D_i (v(i-1) + X_i)``."""

    law: DLaw = PointMass(1.0)
    kind = KIJIMA2

    @property
    def dlaw(self):
        return self.law


@dataclass(frozen=True)
class BrownProschan(VirtualAgePolicy):
    """Perfect repair with probability ``p``, minimal otherwise."""

    p: float = 0.5
    kind = KIJIMA2

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"probability must lie in [0, 1], got {self.p!r}")

    @property
    def dlaw(self):
        return BernoulliComplement(self.p)

    @property
    def params(self):
        return {"p": self.p}


@dataclass(frozen=True)
class AgeReductionFull(VirtualAgePolicy):
    """``v(i) = (1 - rho)(v(i-1) + X_i)``."""

    rho_: float = 0.5
    kind = AGE_RED_FULL

    def __post_init__(self):
        if not 0.0 < self.rho_ < 1.0:
            raise DomainError(f"age-reduction rho must lie in (0, 1), got {self.rho_!r}")

    @property
    def rho(self):
        return self.rho_

    @property
    def params(self):
        return {"rho": self.rho_}


@dataclass(frozen=True)
class AgeReductionIncrement(VirtualAgePolicy):
    """``v(i) = v(i-1) + (1 - rho) X_i``."""

    rho_: float = 0.5
    kind = AGE_RED_INCR

    def __post_init__(self):
        if not 0.0 < self.rho_ < 1.0:
            raise DomainError(f"age-reduction rho must lie in (0, 1), got {self.rho_!r}")

    @property
    def rho(self):
        return self.rho_

    @property
    def params(self):
        return {"rho": self.rho_}


def policy_from_name(name: str, **params) -> VirtualAgePolicy:
    name = name.lower().replace("_", "-")
    if name == "perfect":
        return Perfect()
    if name == "minimal":
        return Minimal()
    if name in ("brown-proschan", "bp"):
        return BrownProschan(params.get("p", 0.5))
    if name in ("kijima1", "kijima-i", "kijima2", "kijima-ii"):
        law = dlaw_from_params(params)
        return KijimaI(law) if name in ("kijima1", "kijima-i") else KijimaII(law)
    if name in ("age-reduction-full", "arf"):
        return AgeReductionFull(params.get("rho", 0.5))
    if name in ("age-reduction-increment", "ari"):
        return AgeReductionIncrement(params.get("rho", 0.5))
    raise DomainError(f"unknown repair policy {name!r}")


def dlaw_from_params(params: dict) -> DLaw:
    law = str(params.get("d", "uniform")).lower()
    if law == "uniform":
        return UniformD()
    if law == "beta":
        return BetaD(params.get("a", 1.0), params.get("b", 1.0))
    if law in ("bernoulli", "bp"):
        return BernoulliComplement(params.get("p", 0.5))
    try:
        return PointMass(float(law))
    except ValueError:
        raise DomainError(f"unknown repair-effect law {law!r}") from None


# --------------------------------------------------------------------------
# ages


def effects_from_marks(marks) -> np.ndarray:
    """Read realized repair effects from event marks.

    ``"perfect"`` means ``D = 0``, ``"minimal"`` means ``D = 1``; any other
    mark must parse as a number in ``[0, 1]``.
    """
    out = np.empty(len(marks))
    for i, m in enumerate(marks):
        key = str(m).strip().lower()
        if key in EFFECT_MARKS:
            out[i] = EFFECT_MARKS[key]
            continue
        try:
            out[i] = float(key)
        except ValueError:
            raise DataError(f"event {i + 1}: mark {m!r} is not a repair effect") from None
        if not 0.0 <= out[i] <= 1.0:
            raise DataError(f"event {i + 1}: repair effect {out[i]!r} outside [0, 1]")
    return out


def resolve_effects(policy: VirtualAgePolicy, history, effects=None) -> np.ndarray:
    n = history.n_events
    if effects is not None:
        effects = np.asarray(effects, dtype=float)
        if effects.size != n:
            raise DataError(f"system {history.system_id}: {effects.size} repair effects for {n} events")
        return effects
    if policy.needs_effects:
        try:
            return effects_from_marks(history.marks)
        except DataError as exc:
            raise DataError(
                f"system {history.system_id}: policy needs observed repair effects D_i ({exc})"
            ) from None
    return policy.default_effects(n)


def post_repair_ages(policy: VirtualAgePolicy, gaps, effects) -> np.ndarray:
    """Ages ``v(0) = 0, v(1), ..., v(n)`` after each repair."""
    gaps = np.asarray(gaps, dtype=float)
    effects = np.asarray(effects, dtype=float)
    return _core.virtual_ages(gaps, effects, policy.kind, float(policy.rho))


def virtual_age(policy: VirtualAgePolicy, history, t, effects=None):
    """Virtual age ``A(t)`` using the left-limit history ``N(t-)``."""
    d = resolve_effects(policy, history, effects)
    v = post_repair_ages(policy, history.interevent_times(), d)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be nonnegative")
    k = np.searchsorted(history.times, t, side="left")  # events strictly before t
    last = np.concatenate([[0.0], history.times])[k]
    out = v[k] + t - last
    return float(out) if out.ndim == 0 else out
