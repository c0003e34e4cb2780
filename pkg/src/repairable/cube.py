"""The eight-corner model cube: fits, edge likelihood-ratio tests and a
fixed-layout text rendering.

Axes: trend to the right (HPP to NHPP), non-Poisson renewal upward (HPP to
RP) and heterogeneity toward the back (HPP to HHPP).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DataError
from .events import as_dataset
from .fitting import FitResult, LrTestResult, ModelFamily, fit, lr_test

CORNERS = ("HPP", "RP", "NHPP", "TRP", "HHPP", "HRP", "HNHPP", "HTRP")

EDGES = (
    ("HPP", "RP"), ("HPP", "NHPP"), ("RP", "TRP"), ("NHPP", "TRP"),
    ("HHPP", "HRP"), ("HHPP", "HNHPP"), ("HRP", "HTRP"), ("HNHPP", "HTRP"),
    ("HPP", "HHPP"), ("RP", "HRP"), ("NHPP", "HNHPP"), ("TRP", "HTRP"),
)

MONOTONE_TOL = 1e-6


def cube_families(renewal="weibull", trend="power", frailty="gamma") -> dict:
    if frailty != "gamma":
        raise DataError(f"unsupported frailty family {frailty!r}; only gamma is available")
    out = {}
    for name in CORNERS:
        het = name.startswith("H") and name != "HPP"
        base = name[1:] if het else name
        out[name] = ModelFamily(
            "trp",
            renewal if base in ("RP", "TRP") else "exponential",
            trend if base in ("NHPP", "TRP") else "constant",
            het,
        )
    return out


@dataclass
class CubeReport:
    """Fits of all eight corners plus edge tests.

    Attributes
    ----------
    fits : dict
        ``FitResult`` per corner name.
    edges : list of LrTestResult
        One test per cube edge, poorer to richer.
    refits : list of tuple
        Edges whose richer corner was refitted from the poorer optimum.
    """

    fits: dict
    edges: list
    refits: list

    def __getitem__(self, corner) -> FitResult:
        return self.fits[corner]

    def edge(self, poorer: str, richer: str) -> LrTestResult:
        # by cube position: with an exponential renewal law the RP fit reports itself as HPP
        try:
            return self.edges[EDGES.index((poorer, richer))]
        except ValueError:
            raise KeyError((poorer, richer)) from None

    def monotone(self, tol=MONOTONE_TOL) -> bool:
        return all(self.fits[r].loglik >= self.fits[p].loglik - tol for p, r in EDGES)

    def records(self) -> list:
        # labelled by cube position, which differs from the fitted corner when an axis collapses
        return [{**self.fits[c].to_record(), "model": c} for c in CORNERS]

    def render(self) -> str:
        """Text cube; each corner shows ``l`` and its free estimates."""

        def cell(name):
            f = self.fits[name]
            return f"{name} l={f.loglik:.2f}"

        def est(name):
            f = self.fits[name]
            parts = []
            for k in ("s", "gamma", "b", "v"):
                if k in f.estimates:
                    parts.append(f"{k}={f.estimates[k]:.3g}")
            return " ".join(parts)

        w = 26
        lines = [
            f"{'':8}{cell('HRP'):<{w}}{cell('HTRP')}",
            f"{'':8}{est('HRP'):<{w}}{est('HTRP')}",
            f"{'':6}/{'':<{w}}/",
            f"{cell('RP'):<{w + 8}}{cell('TRP')}",
            f"{est('RP'):<{w + 8}}{est('TRP')}",
            f"|{'':7}{cell('HHPP'):<{w - 1}}|{cell('HNHPP')}",
            f"|{'':7}{est('HHPP'):<{w - 1}}|{est('HNHPP')}",
            f"|{'':6}/{'':<{w}}|/",
            f"{cell('HPP'):<{w + 8}}{cell('NHPP')}",
            f"{est('HPP'):<{w + 8}}{est('NHPP')}",
            "",
            "trend -> right, renewal -> up, heterogeneity -> back",
        ]
        return "\n".join(lines)


def _warm(poor: FitResult, rich_family: ModelFamily) -> dict:
    init = dict(poor.estimates)
    for name in rich_family.param_names:
        if name not in init:
            init[name] = {"s": 1.0, "gamma": 1.0, "b": 1.0, "v": 0.1}.get(name, 1.0)
    if init.get("v", 1.0) == 0.0:
        init["v"] = 0.1
    return init


def fit_cube(data, renewal="weibull", trend="power", frailty="gamma", tol=1e-8, max_iter=5000) -> CubeReport:
    """Fit the eight corners with warm starts along the edges.

    Richer corners start from their poorer neighbours' optima; any edge on
    which the richer log-likelihood falls below the poorer one is refitted
    from the poorer optimum until the cube is monotone.
    """
    d = as_dataset(data)
    fam = cube_families(renewal, trend, frailty)
    fits = {}

    def run(name, init=None, ref=None):
        return fit(fam[name], d, init=init, tol=tol, max_iter=max_iter, boundary_reference=ref)

    fits["HPP"] = run("HPP")
    fits["RP"] = run("RP", _warm(fits["HPP"], fam["RP"]))
    fits["NHPP"] = run("NHPP", _warm(fits["HPP"], fam["NHPP"]))
    init = _warm(fits["NHPP"], fam["TRP"])
    init[fam["TRP"].params[-1].name] = fits["RP"].estimates.get(fam["TRP"].params[-1].name, 1.0)
    fits["TRP"] = run("TRP", init)
    for name in ("HPP", "RP", "NHPP", "TRP"):
        h = "H" + name
        fits[h] = run(h, _warm(fits[name], fam[h]), ref=fits[name])

    refits = []
    for _ in range(4):
        changed = False
        for poor, rich in EDGES:
            if fits[rich].loglik < fits[poor].loglik - MONOTONE_TOL:
                ref = fits[rich[1:]] if fam[rich].frailty else None
                new = run(rich, _warm(fits[poor], fam[rich]), ref=ref)
                refits.append((poor, rich))
                if new.loglik > fits[rich].loglik:
                    fits[rich] = new
                    changed = True
        if not changed:
            break
    # reported even if a violation survived the refits; monotone() tells
    edges = [lr_test(fits[p], fits[r], tol=math.inf) for p, r in EDGES]
    return CubeReport(fits, edges, refits)
