import math

import numpy as np
import pytest
from scipy import optimize, special

from repairable import datasets
from repairable.cube import CORNERS, EDGES, cube_families, fit_cube
from repairable.errors import DataError
from repairable.models import TRPModel
from repairable.simulation import SimulationPlan, simulate


@pytest.fixture(scope="module")
def valve_cube():
    return fit_cube(datasets.valve_seat())


@pytest.fixture(scope="module")
def hpp_cube():
    return fit_cube(simulate(SimulationPlan(TRPModel.hpp(1.5), 30, 10.0, seed=17)))


def hhpp_oracle(d):
    """Maximize the negative-binomial likelihood of a gamma-mixed HPP directly."""
    n = np.array([h.n_events for h in d])
    tau = d.censor_times

    def negll(x):
        c, v = np.exp(x)
        k = 1 / v
        return -np.sum(special.gammaln(n + k) - special.gammaln(k) + n * np.log(c * v) - (n + k) * np.log1p(v * c * tau))

    res = optimize.minimize(negll, [math.log(n.sum() / tau.sum()), math.log(0.3)], method="BFGS", options={"gtol": 1e-10})
    return -res.fun, np.exp(res.x)


class TestStructure:
    def test_edges_cover_cube(self):
        assert len(EDGES) == 12
        deg = {c: 0 for c in CORNERS}
        for p, r in EDGES:
            deg[p] += 1
            deg[r] += 1
        assert set(deg.values()) == {3}

    def test_families_nest_along_edges(self):
        fam = cube_families()
        for p, r in EDGES:
            assert fam[r].nests(fam[p])
            assert len(fam[r].params) == len(fam[p].params) + 1

    def test_unknown_frailty(self):
        with pytest.raises(DataError):
            cube_families(frailty="lognormal")


class TestValveSeat:
    def test_monotone(self, valve_cube):
        assert valve_cube.monotone()
        for p, r in EDGES:
            assert valve_cube[r].loglik >= valve_cube[p].loglik - 1e-6

    def test_hpp_closed_form(self, valve_cube):
        d = datasets.valve_seat()
        n, exposure = d.n_events, float(np.sum(d.censor_times))
        assert valve_cube["HPP"].loglik == pytest.approx(n * math.log(n / exposure) - n, abs=1e-9)

    def test_hhpp_against_negative_binomial(self, valve_cube):
        ll, (c, v) = hhpp_oracle(datasets.valve_seat())
        fit = valve_cube["HHPP"]
        assert fit.loglik == pytest.approx(ll, abs=1e-6)
        assert fit.estimates["v"] == pytest.approx(v, rel=1e-3)

    def test_edge_statistics(self, valve_cube):
        e = valve_cube.edge("HPP", "NHPP")
        assert e.statistic == pytest.approx(2 * (valve_cube["NHPP"].loglik - valve_cube["HPP"].loglik))
        with pytest.raises(KeyError):
            valve_cube.edge("NHPP", "HPP")

    def test_render_and_records(self, valve_cube):
        text = valve_cube.render()
        for c in CORNERS:
            assert f"{c} l=" in text
        assert "trend -> right" in text
        recs = valve_cube.records()
        assert [r["model"] for r in recs] == list(CORNERS)
        assert all(math.isfinite(r["loglik"]) for r in recs)


def test_exponential_renewal_collapses_axis():
    rep = fit_cube(datasets.valve_seat(), "exponential", "power")
    assert rep["RP"].loglik == pytest.approx(rep["HPP"].loglik, abs=1e-9)
    assert rep["TRP"].loglik == pytest.approx(rep["NHPP"].loglik, abs=1e-6)
    e = rep.edge("HPP", "RP")
    assert e.df == 0 and e.statistic == pytest.approx(0.0, abs=1e-8)
    assert [r["model"] for r in rep.records()] == list(CORNERS)
    assert rep.monotone()


class TestHppData:
    def test_nested_consistency(self, hpp_cube):
        assert hpp_cube.monotone()
        assert hpp_cube["TRP"].estimates["s"] == pytest.approx(1.0, abs=0.2)
        assert hpp_cube["TRP"].estimates["b"] == pytest.approx(1.0, abs=0.15)
        assert hpp_cube["HHPP"].value("v") < 0.1
        # the richest corner gains little over the true model
        assert hpp_cube["HTRP"].loglik - hpp_cube["HPP"].loglik < 6.0
