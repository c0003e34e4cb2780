"""Plot data (Nelson-Aalen mean cumulative function, TTT plot, cumulative
count) and integrated-intensity residual diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .distributions import frailty_quadrature
from .errors import DataError, DomainError
from .events import as_dataset, superpose
from .fitting import FitResult
from .likelihood import htrp_adaptive_system, htrp_log_integrand
from .models import Model, TRPModel
from .trend_tests import TrendTestResult, anderson_darling_uniform, laplace_uniform


@dataclass(frozen=True)
class StepFunctionPlot:
    """Breakpoints ``(t, value)`` of a plotted function.

    ``kind`` is ``"step"`` (right-continuous) or ``"linear"``.
    """

    t: np.ndarray
    value: np.ndarray
    variance: np.ndarray | None = None
    kind: str = "step"
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["t", "value"] + (["variance"] if self.variance is not None else [])
            w.writerow(head)
            for i in range(self.t.size):
                row = [repr(float(self.t[i])), repr(float(self.value[i]))]
                if self.variance is not None:
                    row.append(repr(float(self.variance[i])))
                w.writerow(row)

    def to_svg(self, path, title="") -> None:
        write_svg(path, self.t, self.value, step=self.kind == "step", title=title)


@dataclass(frozen=True)
class TTTPlot:
    """Points ``(i/N, r(T_i)/r(tau_max))`` and a concavity score.

    ``concavity`` is the mean of ``y - x``; positive values indicate a
    concave plot (deterioration), negative a convex one.
    """

    x: np.ndarray
    y: np.ndarray

    @property
    def concavity(self) -> float:
        return float(np.mean(self.y - self.x)) if self.x.size else 0.0

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.y - self.x))) if self.x.size else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y"])
            for a, b in zip(self.x, self.y):
                w.writerow([repr(float(a)), repr(float(b))])

    def to_svg(self, path, title="") -> None:
        write_svg(path, self.x, self.y, step=False, title=title, diagonal=True)


def write_svg(path, x, y, step=True, title="", diagonal=False, size=(480, 360)) -> None:
    """Minimal fixed-layout SVG line plot."""
    W, H = size
    pad = 40
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xmax = float(x.max()) if x.size and x.max() > 0 else 1.0
    ymax = float(y.max()) if y.size and y.max() > 0 else 1.0

    def px(a):
        return pad + (W - 2 * pad) * a / xmax

    def py(b):
        return H - pad - (H - 2 * pad) * b / ymax

    pts = []
    for i in range(x.size):
        if step and i > 0:
            pts.append(f"{px(x[i]):.2f},{py(y[i - 1]):.2f}")
        pts.append(f"{px(x[i]):.2f},{py(y[i]):.2f}")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
        f'<text x="{W / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{W - pad}" y="{H - pad / 4}" text-anchor="end" font-size="11">{xmax:.4g}</text>',
        f'<text x="{pad / 8}" y="{pad}" font-size="11">{ymax:.4g}</text>',
    ]
    if diagonal:
        parts.append(f'<line x1="{px(0)}" y1="{py(0)}" x2="{px(xmax)}" y2="{py(ymax)}" stroke="gray" stroke-dasharray="4"/>')
    parts.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{" ".join(pts)}"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


# --------------------------------------------------------------------------
# plots


def nelson_aalen(data) -> StepFunctionPlot:
    """Nelson-Aalen estimate of the mean cumulative function.

    Jumps ``1/y(T_k)`` at each pooled event; the variance column is the
    simple ``sum 1/y(T_k)^2``.
    """
    d = as_dataset(data)
    if len(d) == 0:
        raise DataError("dataset has no systems")
    sp = superpose(d)
    y = np.asarray(sp.at_risk(sp.times), dtype=float)
    if np.any(y <= 0):
        raise DataError("event observed with no system at risk")
    # tied event times collapse into one breakpoint
    ut, first = np.unique(sp.times, return_index=True)
    m_all, v_all = np.cumsum(1.0 / y), np.cumsum(1.0 / y**2)
    last = (np.append(first[1:], sp.times.size) - 1)[: ut.size]
    t = np.concatenate([[0.0], ut, [sp.horizon]])
    m = np.concatenate([[0.0], m_all[last]])
    v = np.concatenate([[0.0], v_all[last]])
    m = np.append(m, m[-1])
    v = np.append(v, v[-1])
    return StepFunctionPlot(t, m, v, "step", {"variance": "simple Poisson-type sum of 1/y^2; robust variance not computed"})


def cumulative_count(history) -> StepFunctionPlot:
    """``N(t)`` for one system."""
    return nelson_aalen(history)


def ttt_plot(data) -> TTTPlot:
    d = as_dataset(data)
    sp = superpose(d)
    n = sp.times.size
    if n == 0:
        return TTTPlot(np.zeros(0), np.zeros(0))
    x = np.arange(1, n + 1) / n
    y = np.asarray(sp.ttt(sp.times)) / float(sp.ttt(sp.horizon))
    return TTTPlot(x, y)


# --------------------------------------------------------------------------
# residuals


@dataclass(frozen=True)
class AutocorrelationCheck:
    r1: float
    z: float
    p_value: float
    pairs: int


@dataclass(frozen=True)
class ResidualReport:
    """Integrated-intensity residuals and the three checks.

    Attributes
    ----------
    increments : dict
        Residual gaps ``int_{T_{i-1}}^{T_i} gamma`` per system id.
    windows : dict
        ``int_0^tau gamma`` per system id.
    frailty : dict
        Frailty value used per system (1 without frailty).
    exponentiality : TrendTestResult
        ``A^2`` of ``1 - exp(-e)`` over all residual gaps.
    trend : TrendTestResult
        Combined Laplace test on the residual processes.
    autocorrelation : AutocorrelationCheck
        Lag-1 autocorrelation of consecutive residual gaps within systems.
    """

    increments: dict
    windows: dict
    frailty: dict
    exponentiality: TrendTestResult
    trend: TrendTestResult
    autocorrelation: AutocorrelationCheck
    metadata: dict = field(default_factory=dict)

    def all_increments(self) -> np.ndarray:
        vals = [v for v in self.increments.values() if v.size]
        return np.concatenate(vals) if vals else np.zeros(0)

    def to_records(self) -> list:
        return [
            {"check": "exponentiality", "statistic": self.exponentiality.statistic, "p": self.exponentiality.p_value,
             "method": "anderson-darling on 1-exp(-e)"},
            {"check": "trend", "statistic": self.trend.statistic, "p": self.trend.p_value,
             "method": "combined laplace on residual processes"},
            {"check": "autocorrelation", "statistic": self.autocorrelation.r1, "p": self.autocorrelation.p_value,
             "method": "lag-1 autocorrelation, normal approximation"},
        ]


def _quadrature_posterior_mean(base, frailty, h, nodes):
    a, w = frailty_quadrature(frailty, nodes)
    with np.errstate(divide="ignore"):
        logs = htrp_log_integrand(base, h, a) + np.log(w)
    return float(np.exp(logsumexp(logs, b=a) - logsumexp(logs)))


def posterior_frailty(spec: Model, h, nodes=16, *, rtol=1e-10, cap=512) -> float:
    """Posterior mean of the gamma frailty given one system's history.

    Multiplicative models use the conjugate closed form.  For the HTRP the
    gamma-matched rule is doubled from ``nodes`` until the mean moves by
    less than ``rtol`` (relative); past ``cap`` it falls back to adaptive
    integration over ``log a``.
    """
    delta = spec.frailty.variance
    base = spec.without_frailty()
    if spec.multiplicative:
        c = base.covariate_log_multiplier(h)
        cum = math.exp(c) * float(np.sum(base.compensator_increments(h)))
        return (h.n_events + 1.0 / delta) / (cum + 1.0 / delta)
    n = int(nodes)
    cur = _quadrature_posterior_mean(base, spec.frailty, h, n)
    while 2 * n <= cap:
        nxt = _quadrature_posterior_mean(base, spec.frailty, h, 2 * n)
        n *= 2
        if abs(nxt - cur) <= rtol * abs(nxt):
            return nxt
        cur = nxt
    top, _ = htrp_adaptive_system(base, h, delta, moment=1)
    bottom, _ = htrp_adaptive_system(base, h, delta)
    return math.exp(top - bottom)


def _system_residuals(spec: Model, h, effects, a):
    base = spec.without_frailty()
    g = math.exp(base.covariate_log_multiplier(h))
    if isinstance(base, TRPModel) and not spec.multiplicative:
        inc = np.asarray(base.renewal.cumhaz(a * base.transformed_gaps(h)), dtype=float)
        return g * inc
    return a * g * np.asarray(base.compensator_increments(h, effects), dtype=float)


def lag1_autocorrelation(series: list) -> AutocorrelationCheck:
    """Pooled lag-1 autocorrelation over several sequences.

    ``sqrt(P) r1`` is compared with the standard normal, ``P`` being the
    number of within-sequence consecutive pairs.
    """
    allv = np.concatenate([s for s in series if s.size]) if series else np.zeros(0)
    pairs = sum(max(s.size - 1, 0) for s in series)
    if pairs < 2 or allv.size < 3:
        return AutocorrelationCheck(math.nan, math.nan, math.nan, pairs)
    mean = allv.mean()
    denom = np.mean((allv - mean) ** 2)
    if denom == 0:
        return AutocorrelationCheck(math.nan, math.nan, math.nan, pairs)
    num = sum(float(np.sum((s[:-1] - mean) * (s[1:] - mean))) for s in series if s.size > 1) / pairs
    r1 = num / denom
    z = r1 * math.sqrt(pairs)
    return AutocorrelationCheck(r1, z, float(2.0 * stats.norm.sf(abs(z))), pairs)


def cox_snell_residuals(fit, data, effects=None) -> ResidualReport:
    """Residuals ``int gamma`` between events for a fitted model.

    Parameters
    ----------
    fit : FitResult or Model
        A converged fit, or a model to evaluate residuals at given parameters.
    data : EventDataset
    effects : dict, optional
        Repair effects per system id for virtual-age models.

    Frailty fits use each system's posterior-mean frailty.
    """
    if isinstance(fit, FitResult):
        if not fit.converged:
            raise DomainError(
                f"fit of {fit.corner} did not converge; residuals at a non-optimal point are not meaningful"
            )
        spec = fit.spec
    elif isinstance(fit, Model):
        spec = fit
    else:
        raise DomainError("expected a FitResult or a Model")
    d = as_dataset(data)
    increments, windows, frailty, series, uniforms = {}, {}, {}, [], []
    for h in d.systems:
        eff = None if effects is None else effects.get(h.system_id)
        a = 1.0 if spec.frailty.is_degenerate else posterior_frailty(spec, h)
        e = _system_residuals(spec, h, eff, a)
        ev, total = e[:-1], float(np.sum(e))
        if np.any(ev <= 0):
            raise DomainError(f"system {h.system_id}: nonpositive residual increment")
        increments[h.system_id] = ev
        windows[h.system_id] = total
        frailty[h.system_id] = a
        series.append(ev)
        if ev.size:
            uniforms.append(np.cumsum(ev) / total)
    allv = np.concatenate(series) if any(s.size for s in series) else np.zeros(0)
    if allv.size == 0:
        raise DataError("no events: residual checks need at least one event")
    expo = anderson_darling_uniform(-np.expm1(-allv), "residual-exponentiality", "HPP(1)")
    trend = laplace_uniform(np.concatenate(uniforms), "two-sided", "residual-trend", "HPP(1)")
    auto = lag1_autocorrelation(series)
    meta = {"checks": "A^2 exponentiality, combined Laplace, lag-1 autocorrelation (implementation choices)"}
    if not spec.frailty.is_degenerate:
        meta["frailty"] = "posterior-mean frailty per system"
    return ResidualReport(increments, windows, frailty, expo, trend, auto, meta)
