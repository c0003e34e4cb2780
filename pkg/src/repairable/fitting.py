"""Maximum-likelihood fitting and likelihood-ratio tests.

A :class:`ModelFamily` names the free parameters of a model; :func:`fit`
maximizes the exact log-likelihood with a Nelder-Mead simplex on
transformed parameters (log for positive, logit for unit-interval ones).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .distributions import (
    DegenerateFrailty,
    Exponential,
    Gamma,
    GammaFrailty,
    Lifetime,
    Weibull,
)
from .errors import DataError, DomainError, NumericalError
from .events import as_dataset
from .likelihood import loglik, loglik_htrp
from .models import LogLinearModulatedModel, Model, TRPModel, VirtualAgeModel
from .repair import AgeReductionFull, AgeReductionIncrement, VirtualAgePolicy
from .trends import LogLinear, PowerLaw

POSITIVE, UNIT, REAL = "positive", "unit", "real"
RENEWAL_PARAM = {"weibull": "s", "gamma": "gamma"}


@dataclass(frozen=True)
class Param:
    name: str
    kind: str
    default: float


def _to_internal(p: Param, value: float) -> float:
    if p.kind == POSITIVE:
        return math.log(value)
    if p.kind == UNIT:
        return math.log(value / (1.0 - value))
    return float(value)


def _to_external(p: Param, x: float) -> float:
    if p.kind == POSITIVE:
        return math.exp(x)
    if p.kind == UNIT:
        return 1.0 / (1.0 + math.exp(-x))
    return float(x)


@dataclass(frozen=True)
class ModelFamily:
    """A parametric family of single-type models.

    Parameters
    ----------
    kind : {"trp", "virtual-age", "loglinear-modulated"}
    renewal : {"exponential", "weibull", "gamma"}
        Renewal law (TRP) or new-unit lifetime law (virtual age).
    trend : {"constant", "power", "loglinear"}
        TRP trend; ``"constant"`` is the power law with ``b`` fixed at 1.
    frailty : bool
        Include a gamma frailty with variance ``v``.
    policy : VirtualAgePolicy, optional
        Repair policy for virtual-age families; age-reduction ``rho`` is
        estimated.
    links : tuple of str
        ``(g1, g2)`` for the log-linear modulated family.
    n_covariates : int
        Number of covariate coefficients ``beta1, beta2, ...``.
    """

    kind: str = "trp"
    renewal: str = "exponential"
    trend: str = "constant"
    frailty: bool = False
    policy: VirtualAgePolicy | None = None
    links: tuple = ("identity", "identity")
    n_covariates: int = 0

    def __post_init__(self):
        if self.kind not in ("trp", "virtual-age", "loglinear-modulated"):
            raise DomainError(f"unknown family kind {self.kind!r}")
        if self.renewal not in ("exponential", "weibull", "gamma"):
            raise DomainError(f"unknown renewal family {self.renewal!r}")
        if self.trend not in ("constant", "power", "loglinear"):
            raise DomainError(f"unknown trend family {self.trend!r}")

    @property
    def corner(self) -> str:
        if self.kind != "trp":
            return self.kind
        base = {(False, False): "HPP", (True, False): "RP", (False, True): "NHPP", (True, True): "TRP"}[
            (self.renewal != "exponential", self.trend != "constant")
        ]
        return ("H" if self.frailty else "") + base

    @property
    def params(self) -> list:
        out = []
        if self.kind == "trp":
            if self.trend == "loglinear":
                out += [Param("a0", REAL, 0.0), Param("a1", REAL, 0.0)]
            else:
                out.append(Param("c", POSITIVE, 1.0))
                if self.trend == "power":
                    out.append(Param("b", POSITIVE, 1.0))
            if self.renewal in RENEWAL_PARAM:
                out.append(Param(RENEWAL_PARAM[self.renewal], POSITIVE, 1.0))
        elif self.kind == "virtual-age":
            out.append(Param("c", POSITIVE, 1.0))
            if self.renewal in RENEWAL_PARAM:
                out.append(Param(RENEWAL_PARAM[self.renewal], POSITIVE, 1.0))
            if isinstance(self.policy, (AgeReductionFull, AgeReductionIncrement)):
                out.append(Param("rho", UNIT, 0.5))
        else:
            out += [Param("b0", REAL, 0.0), Param("b1", REAL, 0.0), Param("b2", REAL, 0.0)]
        if self.frailty:
            out.append(Param("v", POSITIVE, 0.1))
        out += [Param(f"beta{i + 1}", REAL, 0.0) for i in range(self.n_covariates)]
        return out

    @property
    def param_names(self) -> tuple:
        return tuple(p.name for p in self.params)

    def fixed_values(self) -> dict:
        """Values of parameters held at their null value in this family."""
        out = {}
        if self.kind == "trp":
            if self.trend == "constant":
                out["b"] = 1.0
            if self.renewal == "exponential":
                out["s"] = 1.0
        if not self.frailty:
            out["v"] = 0.0
        return out

    def without_frailty(self) -> "ModelFamily":
        from dataclasses import replace

        return replace(self, frailty=False)

    def _renewal(self, values):
        if self.renewal == "weibull":
            return Weibull(values["s"])
        if self.renewal == "gamma":
            return Gamma(values["gamma"])
        return Exponential()

    def build(self, values: dict) -> Model:
        frailty = GammaFrailty(values["v"]) if self.frailty and values.get("v", 0.0) > 0 else DegenerateFrailty()
        beta = tuple(values[f"beta{i + 1}"] for i in range(self.n_covariates)) or None
        if self.kind == "trp":
            if self.trend == "loglinear":
                trend = LogLinear(values["a0"], values["a1"])
            else:
                trend = PowerLaw(values["c"], values.get("b", 1.0) if self.trend == "power" else 1.0)
            return TRPModel(self._renewal(values), trend, frailty, beta)
        if self.kind == "virtual-age":
            policy = self.policy
            if isinstance(policy, AgeReductionFull):
                policy = AgeReductionFull(values["rho"])
            elif isinstance(policy, AgeReductionIncrement):
                policy = AgeReductionIncrement(values["rho"])
            return VirtualAgeModel(Lifetime(self._renewal(values), values["c"]), policy, frailty, beta)
        return LogLinearModulatedModel(
            values["b0"], values["b1"], values["b2"], self.links[0], self.links[1], frailty, beta
        )

    def nests(self, other: "ModelFamily") -> bool:
        """Whether ``other`` is a sub-family of ``self`` (fixing parameters at null values)."""
        if self.kind != other.kind or self.n_covariates != other.n_covariates:
            return False
        if not set(other.param_names) <= set(self.param_names):
            return False
        if other.frailty and not self.frailty:
            return False
        if self.renewal != other.renewal and other.renewal != "exponential":
            return False
        if self.trend != other.trend and not (other.trend == "constant" and self.trend == "power"):
            return False
        return True


@dataclass
class FitResult:
    """Outcome of a maximum-likelihood fit.

    Attributes
    ----------
    family : ModelFamily
    spec : Model or None
        Model at the estimates; ``None`` for an HPP fitted to data without
        events, whose rate estimate is the boundary value 0.
    estimates : dict
        Free-parameter estimates; boundary values included (``v = 0``).
    loglik : float
        Maximized log-likelihood ``l``.
    converged : bool
    iterations : int
    boundary : dict
        Parameters whose estimate sits on the boundary of their domain.
    flags : dict
        Diagnostics such as ``unidentifiable``.
    """

    family: ModelFamily
    spec: Model
    estimates: dict
    loglik: float
    converged: bool = True
    iterations: int = 0
    boundary: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    message: str = ""

    @property
    def corner(self) -> str:
        return self.family.corner

    @property
    def n_params(self) -> int:
        return len(self.family.params)

    def value(self, name: str) -> float:
        if name in self.estimates:
            return self.estimates[name]
        return self.family.fixed_values().get(name, math.nan)

    def to_record(self) -> dict:
        rec = {"model": self.corner, "loglik": self.loglik, "converged": self.converged, "iterations": self.iterations}
        for name in ("c", "b", "s", "gamma", "v"):
            if name in self.estimates or name in self.family.fixed_values():
                rec[name] = self.value(name)
        for k, v in self.estimates.items():
            rec.setdefault(k, v)
        rec["boundary"] = ";".join(sorted(k for k, v in self.boundary.items() if v))
        return rec


def _objective(family: ModelFamily, d, params):
    def neg(x):
        values = {p.name: _to_external(p, xi) for p, xi in zip(params, x)}
        try:
            with np.errstate(all="ignore"):
                spec = family.build(values)
                if isinstance(spec, TRPModel) and not spec.multiplicative:
                    val = loglik_htrp(spec, d, strict=False, fallback=False).total
                else:
                    val = loglik(spec, d).total
        except (DomainError, NumericalError, OverflowError, ValueError, ZeroDivisionError):
            return math.inf
        return -val if np.isfinite(val) else math.inf

    return neg


def _initial(family: ModelFamily, d, init: dict | None) -> dict:
    n = d.n_events
    exposure = float(np.sum(d.censor_times))
    rate = n / exposure if n > 0 else 1.0 / exposure
    values = {p.name: p.default for p in family.params}
    if "c" in values:
        values["c"] = rate
    if "a0" in values:
        values["a0"] = math.log(rate)
    if "b0" in values:
        values["b0"] = math.log(rate)
    if init:
        for k, v in init.items():
            if k in values:
                values[k] = float(v)
        if "c" in values and "c" not in init and "b" in init:
            # keep the expected count when only the shape is warm-started
            values["c"] = n / float(np.sum(d.censor_times ** values["b"])) if n > 0 else values["c"]
    for p in family.params:
        if p.kind == POSITIVE and not values[p.name] > 0:
            values[p.name] = p.default if p.name != "v" else 0.1
        if p.kind == UNIT and not 0 < values[p.name] < 1:
            values[p.name] = 0.5
    return values


def _simplex_run(fun, x0, tol, max_iter, step=0.25):
    k = x0.size
    simplex = np.vstack([x0] + [x0 + step * np.eye(k)[j] for j in range(k)])
    res = optimize.minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "fatol": tol,
            "xatol": 1e-7,
            "maxiter": max_iter,
            "maxfev": 4 * max_iter,
            "adaptive": k > 2,
        },
    )
    return res


def _hpp_closed_form(family, d):
    n = d.n_events
    exposure = float(np.sum(d.censor_times))
    lam = n / exposure
    ll = n * math.log(lam) - n if n > 0 else 0.0
    return {"c": lam}, ll


def fit(family: ModelFamily, data, init: dict | None = None, tol: float = 1e-8, max_iter: int = 5000,
        restarts: int = 3, boundary_reference: FitResult | None = None) -> FitResult:
    """Maximum-likelihood fit of ``family`` to ``data``.

    Parameters
    ----------
    family : ModelFamily
    data : EventDataset
    init : dict, optional
        Starting values by parameter name.
    tol : float
        Convergence threshold on the spread of simplex log-likelihoods.
    max_iter : int
        Iteration cap per simplex run.
    restarts : int
        Deterministic perturbed restarts from the best point found.
    boundary_reference : FitResult, optional
        Fit of the frailty-free sub-family; computed when omitted.

    Returns
    -------
    FitResult
        ``converged`` is false when no run met the tolerance; the best point
        is returned regardless.
    """
    d = as_dataset(data)
    if len(d) == 0:
        raise DataError("dataset has no systems")
    is_hpp = family.kind == "trp" and family.corner == "HPP" and family.n_covariates == 0
    if d.n_events == 0 and not is_hpp:
        raise DataError("all systems are empty: trend and shape parameters are not estimable")
    flags = {}
    if family.kind == "virtual-age" and family.renewal == "exponential":
        flags["unidentifiable"] = "constant hazard: the repair policy has no effect on the likelihood"
    if is_hpp:
        est, ll = _hpp_closed_form(family, d)
        if d.n_events == 0:
            # the rate MLE sits on the boundary c = 0, which no model represents
            return FitResult(family, None, est, ll, True, 0, {"c": True}, flags, "closed form; no events")
        return FitResult(family, family.build(est), est, ll, True, 0, {}, flags, "closed form")
    if family.frailty and boundary_reference is None:
        boundary_reference = fit(family.without_frailty(), d, init, tol, max_iter, restarts)
    if family.frailty and init is None and boundary_reference is not None:
        init = dict(boundary_reference.estimates)
        init.setdefault("v", 0.1)

    params = family.params
    values = _initial(family, d, init)
    x0 = np.array([_to_internal(p, values[p.name]) for p in params])
    fun = _objective(family, d, params)
    best = _simplex_run(fun, x0, tol, max_iter)
    iterations = int(best.nit)
    converged = bool(best.success)
    k = x0.size
    patterns = [np.where(np.arange(k) % 2 == 0, 0.3, -0.3), np.where(np.arange(k) % 2 == 0, -0.3, 0.3), np.full(k, 0.1)]
    for r in range(restarts):
        res = _simplex_run(fun, best.x + patterns[r % 3], tol, max_iter)
        iterations += int(res.nit)
        if res.fun < best.fun - 1e-12 or (not converged and res.success and res.fun <= best.fun + tol):
            best = res
            converged = bool(res.success)
    # polish
    res = _simplex_run(fun, best.x, tol, max_iter, step=0.02)
    iterations += int(res.nit)
    if res.fun <= best.fun:
        best = res
        converged = converged or bool(res.success)

    est = {p.name: _to_external(p, xi) for p, xi in zip(params, best.x)}
    ll = -float(best.fun)
    if not np.isfinite(ll):
        raise NumericalError(f"{family.corner}: log-likelihood is not finite at any tried point")
    spec = family.build(est)
    if isinstance(spec, TRPModel) and not spec.multiplicative:
        ll = loglik_htrp(spec, d, strict=False, fallback=False).total
    boundary = {}
    if family.frailty and boundary_reference is not None and (
        boundary_reference.loglik >= ll - 1e-6 or est["v"] < 1e-6
    ):
        # the maximum over the closed domain sits at v = 0
        est = dict(boundary_reference.estimates, v=0.0)
        ll = boundary_reference.loglik
        spec = boundary_reference.spec
        boundary["v"] = True
    return FitResult(family, spec, est, ll, converged, iterations, boundary, flags)


# --------------------------------------------------------------------------
# likelihood-ratio tests


@dataclass(frozen=True)
class LrTestResult:
    """Likelihood-ratio test of a nested pair.

    Attributes
    ----------
    statistic : float
        ``max(0, 2 (l_rich - l_poor))``.
    df : int
    p_naive : float
        Chi-squared with ``df`` degrees of freedom.
    p_boundary : float
        Equal mixture of chi-squared with ``df - 1`` and ``df`` degrees of
        freedom when the extra parameters include a variance tested at zero;
        equal to ``p_naive`` otherwise.
    """

    poorer: str
    richer: str
    statistic: float
    df: int
    p_naive: float
    p_boundary: float


def _chi2_sf(x, df):
    if df == 0:
        return 1.0 if x <= 0 else 0.0
    return float(stats.chi2.sf(x, df))


def lr_test(poorer: FitResult, richer: FitResult, *, nested: bool | None = None, tol: float = 1e-6) -> LrTestResult:
    """Likelihood-ratio test of ``poorer`` against ``richer``.

    Raises
    ------
    DomainError
        If the families are not nested (override with ``nested=True``) or
        the richer fit is worse than the poorer beyond ``tol``.
    """
    if nested is None:
        nested = richer.family.nests(poorer.family)
    if not nested:
        raise DomainError(f"{poorer.corner} is not nested in {richer.corner}")
    if richer.loglik < poorer.loglik - tol:
        raise DomainError(
            f"richer model {richer.corner} has lower log-likelihood than {poorer.corner}; refit before testing"
        )
    stat = max(0.0, 2.0 * (richer.loglik - poorer.loglik))
    df = richer.n_params - poorer.n_params
    p_naive = _chi2_sf(stat, df)
    variance_tested = richer.family.frailty and not poorer.family.frailty
    if variance_tested:
        p_boundary = 0.5 * _chi2_sf(stat, df - 1) + 0.5 * _chi2_sf(stat, df)
    else:
        p_boundary = p_naive
    return LrTestResult(poorer.corner, richer.corner, stat, df, p_naive, p_boundary)
