import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from repairable.distributions import GammaFrailty, Weibull
from repairable.errors import DataError, DomainError
from repairable.events import EventDataset, SystemHistory
from repairable.models import TRPModel
from repairable.simulation import SimulationPlan, simulate
from repairable.trend_tests import (
    PER_SYSTEM,
    TESTS,
    InsufficientResamplesWarning,
    anderson_darling,
    anderson_darling_statistic,
    anderson_darling_uniform,
    combined_laplace,
    combined_military_handbook,
    laplace,
    lewis_robinson,
    mann,
    mann_moments,
    mann_pooled,
    military_handbook,
    resampled_null,
    ttt_transform,
)
from repairable.trends import PowerLaw


def one(times, tau=1.0):
    return SystemHistory("s", times, tau)


def ad_integral_oracle(u):
    """A^2 = n * int (F_n(t) - t)^2 / (t (1 - t)) dt, integrated piecewise."""
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    knots = np.concatenate([[0.0], u, [1.0]])
    total = 0.0
    for k, (a, b) in enumerate(zip(knots, knots[1:])):
        fn = k / n
        total += integrate.quad(lambda t, fn=fn: (fn - t) ** 2 / (t * (1 - t)), a, b, epsabs=1e-13, limit=200)[0]
    return n * total


class TestLaplace:
    def test_symmetric(self):
        r = laplace(one([0.25, 0.75]))
        assert r.statistic == 0.0 and r.p_value == 1.0 and r.null == "HPP"

    def test_single_late_event(self):
        r = laplace(one([0.9]))
        assert r.statistic == pytest.approx(0.4 * math.sqrt(12), rel=1e-14)
        assert r.statistic == pytest.approx(1.3856, abs=1e-4)
        assert r.p_value == pytest.approx(2 * stats.norm.sf(0.4 * math.sqrt(12)))

    def test_single_early_event(self):
        r = laplace(one([0.1]), alternative="improving")
        assert r.statistic == pytest.approx(-1.3856, abs=1e-4)
        assert r.p_value == pytest.approx(stats.norm.cdf(r.statistic))
        assert laplace(one([0.1]), alternative="deteriorating").p_value == pytest.approx(stats.norm.sf(r.statistic))

    def test_no_events(self):
        with pytest.raises(DataError, match="no events"):
            laplace(one([]))

    def test_bad_alternative(self):
        with pytest.raises(DomainError):
            laplace(one([0.5]), alternative="up")


class TestMilitaryHandbook:
    def test_one_term(self):
        assert military_handbook(one([1 / math.e])).statistic == pytest.approx(2.0, rel=1e-14)

    def test_two_terms(self):
        r = military_handbook(one([0.5 / math.e, 1 / math.e]), alternative="deteriorating")
        assert r.statistic == pytest.approx(4.0 + 2 * math.log(2), rel=1e-14)
        assert r.p_value == pytest.approx(stats.chi2.cdf(r.statistic, 4))
        r2 = military_handbook(SystemHistory("s", [1 / math.e, 1 / math.e + 1e-12], 1.0))
        assert r2.statistic == pytest.approx(4.0, abs=1e-10)

    def test_deterioration_limit(self):
        r = military_handbook(one([1 - 1e-9, 1 - 1e-10]), alternative="deteriorating")
        assert r.statistic < 1e-8 and r.p_value < 1e-15

    def test_two_sided(self):
        r = military_handbook(one([0.2, 0.6]))
        lo, hi = stats.chi2.cdf(r.statistic, 4), stats.chi2.sf(r.statistic, 4)
        assert r.p_value == pytest.approx(2 * min(lo, hi))


class TestTtt:
    def test_single_system(self):
        np.testing.assert_allclose(ttt_transform(one([2.0, 5.0], 10.0)), [0.2, 0.5])

    def test_two_systems(self):
        d = EventDataset([SystemHistory("a", [2.0], 10.0), SystemHistory("b", [], 10.0)])
        np.testing.assert_allclose(ttt_transform(d), [0.2])

    def test_unequal_windows(self):
        d = EventDataset([SystemHistory("a", [6.0], 10.0), SystemHistory("b", [], 4.0)])
        # r(6) = 4 + 6 = 10 with the shorter system leaving at 4; r(10) = 14
        np.testing.assert_allclose(ttt_transform(d), [10 / 14])

    def test_empty(self):
        assert ttt_transform(EventDataset([SystemHistory("a", [], 1.0), SystemHistory("b", [], 2.0)])).size == 0


class TestAndersonDarling:
    @pytest.mark.parametrize("u", [[0.5], [0.1, 0.7], [0.05, 0.3, 0.31, 0.9]])
    def test_statistic_against_integral(self, u):
        assert anderson_darling_statistic(u) == pytest.approx(ad_integral_oracle(u), rel=1e-8)

    def test_half(self):
        assert anderson_darling_statistic([0.5]) == pytest.approx(-1 + 2 * math.log(2), rel=1e-14)

    @pytest.mark.parametrize(("a2", "p"), [(1.933, 0.10), (2.492, 0.05), (3.857, 0.01)])
    def test_asymptotic_critical_values(self, a2, p):
        # classical asymptotic percentage points for the fully specified case
        from repairable.trend_tests import _adinf

        assert 1 - _adinf(a2) == pytest.approx(p, abs=5e-4)

    def test_clustered_rejects(self):
        r = anderson_darling_uniform(np.full(20, 0.99) + np.linspace(0, 0.005, 20))
        assert r.statistic > 20 and r.p_value < 1e-6
        assert anderson_darling(one([0.99])).statistic > anderson_darling(one([0.5])).statistic


class TestCombined:
    def test_symmetric(self):
        d = EventDataset([SystemHistory("a", [1.0, 3.0], 4.0), SystemHistory("b", [2.5], 5.0)])
        assert combined_laplace(d).statistic == pytest.approx(0.0, abs=1e-15)
        assert combined_laplace(d).null == "HPP-heterogeneous-rates"

    def test_two_late_events(self):
        d = EventDataset([SystemHistory("a", [9.0], 10.0), SystemHistory("b", [1.8], 2.0)])
        assert combined_laplace(d).statistic == pytest.approx(0.8 / math.sqrt(2 / 12), rel=1e-13)
        assert combined_laplace(d).statistic == pytest.approx(1.9596, abs=1e-4)

    def test_military_pools_uniforms(self):
        d = EventDataset([SystemHistory("a", [5.0], 10.0), SystemHistory("b", [1.0], 4.0)])
        assert combined_military_handbook(d).statistic == pytest.approx(-2 * (math.log(0.5) + math.log(0.25)))

    def test_size_under_heterogeneous_rates(self):
        reps, alpha = 3000, 0.05
        spec = TRPModel.hpp(1.0, frailty=GammaFrailty(0.5))
        rej = 0
        for r in range(reps):
            d = simulate(SimulationPlan(spec, 5, 4.0, seed=r))
            if d.n_events == 0:
                continue
            rej += combined_laplace(d).p_value < alpha
        assert abs(rej / reps - alpha) < 3 * math.sqrt(alpha * (1 - alpha) / reps)


class TestLewisRobinson:
    def test_exponential_cv_near_one(self):
        d = simulate(SimulationPlan(TRPModel.hpp(1.0), 1, 5000.0, seed=1))
        h = d[0]
        assert lewis_robinson(h).statistic == pytest.approx(laplace(h).statistic, rel=0.05)
        assert lewis_robinson(h).null == "RP"

    def test_formula(self):
        h = one([1.0, 3.0, 3.5, 7.0], 8.0)
        x = np.diff([0.0, 1.0, 3.0, 3.5, 7.0])
        cv = x.std(ddof=1) / x.mean()
        assert lewis_robinson(h).statistic == pytest.approx(laplace(h).statistic / cv, rel=1e-14)

    def test_degenerate_cv(self):
        with pytest.raises(DataError, match="degenerate CV"):
            lewis_robinson(one([1.0, 2.0, 3.0], 4.0))

    def test_too_few_events(self):
        with pytest.raises(DataError):
            lewis_robinson(one([1.0, 2.5], 4.0))


class TestMann:
    def test_increasing_gaps(self):
        h = one([1.0, 3.0, 6.0], 7.0)
        r = mann(h)
        assert r.statistic == 3
        assert mann_moments(3) == pytest.approx((1.5, 11 / 12))

    @pytest.mark.parametrize("n", [3, 4, 6])
    def test_moments_by_enumeration(self, n):
        counts = [sum(p[i] < p[j] for i in range(n) for j in range(i + 1, n)) for p in itertools.permutations(range(n))]
        mean, var = mann_moments(n)
        assert np.mean(counts) == pytest.approx(mean)
        assert np.var(counts) == pytest.approx(var)

    def test_direction(self):
        # lengthening gaps mean improvement
        h = one(np.cumsum(np.arange(1, 12, dtype=float)), 70.0)
        assert mann(h, alternative="improving").p_value < 0.001
        assert mann(h, alternative="deteriorating").p_value > 0.999

    def test_pooled(self):
        hs = [one([1.0, 3.0, 6.0], 7.0), SystemHistory("t", [2.0, 3.0, 3.5], 4.0), SystemHistory("u", [1.0], 2.0)]
        r = mann_pooled(EventDataset(hs))
        assert r.statistic == 3 + 0
        assert r.n == 6
        with pytest.raises(DataError):
            mann_pooled(EventDataset([SystemHistory("a", [1.0], 2.0)]))


class TestResampling:
    def test_deterministic(self):
        h = simulate(SimulationPlan(TRPModel(Weibull(3.0), PowerLaw(1, 1)), 1, 40.0, seed=3))[0]
        a = resampled_null(laplace, h, B=199, seed=5)
        b = resampled_null(laplace, h, B=199, seed=5)
        assert a == b
        assert a.calibration == "resampled(B=199, seed=5)" and a.null == "RP"
        k = round(a.p_value * 200)
        assert a.p_value == pytest.approx(k / 200)

    def test_centered_observation_gives_one(self):
        with pytest.warns(InsufficientResamplesWarning):
            r = resampled_null(laplace, one([0.25, 0.75]), B=3, seed=0)
        assert r.p_value == 1.0

    def test_identical_gaps_give_one(self):
        for test in (laplace, military_handbook, mann):
            assert resampled_null(test, one([1.0, 2.0, 3.0, 4.0], 5.0), B=99, seed=1).p_value == 1.0

    def test_batch_matches_loop(self):
        # the vectorized single-system path and the generic loop agree
        h = simulate(SimulationPlan(TRPModel(Weibull(2.0), PowerLaw(1, 1.3)), 1, 30.0, seed=4))[0]
        fast = resampled_null(laplace, h, B=299, seed=9)
        slow = resampled_null(lambda x, alternative="two-sided": laplace(x, alternative), h, B=299, seed=9)
        assert fast.p_value == slow.p_value

    def test_dataset_level(self):
        d = simulate(SimulationPlan(TRPModel(Weibull(2.0), PowerLaw(1, 1)), 4, 15.0, seed=6))
        r = resampled_null(combined_laplace, d, B=99, seed=2)
        assert 0 < r.p_value <= 1

    def test_bad_b(self):
        with pytest.raises(DomainError):
            resampled_null(laplace, one([0.5]), B=0)


class TestProperties:
    @given(
        gaps=st.lists(st.floats(0.01, 5.0), min_size=3, max_size=30),
        tail=st.floats(0.01, 3.0),
        e=st.integers(-6, 6),
    )
    def test_scale_invariance_exact(self, gaps, tail, e):
        t = np.cumsum(gaps)
        h = one(t, t[-1] + tail)
        k = 2.0**e
        hk = one(t * k, (t[-1] + tail) * k)
        for name in ("laplace", "military-handbook", "anderson-darling", "mann"):
            assert TESTS[name](hk).statistic == TESTS[name](h).statistic
        np.testing.assert_array_equal(ttt_transform(hk), ttt_transform(h))
        try:
            lr = lewis_robinson(h).statistic
        except DataError:
            return
        assert lewis_robinson(hk).statistic == pytest.approx(lr, rel=1e-12)

    @given(
        # distinct gaps: rescaling may split exact ties, which Mann counts
        gaps=st.lists(st.integers(1, 500), min_size=3, max_size=30, unique=True),
        tail=st.floats(0.01, 3.0),
        k=st.floats(1e-3, 1e3),
    )
    def test_scale_invariance(self, gaps, tail, k):
        t = np.cumsum(np.asarray(gaps) / 100.0)
        h, hk = one(t, t[-1] + tail), one(t * k, (t[-1] + tail) * k)
        for name in PER_SYSTEM - {"lewis-robinson"}:
            assert TESTS[name](hk).statistic == pytest.approx(TESTS[name](h).statistic, rel=1e-9, abs=1e-9)

    @given(st.lists(st.floats(0.01, 5.0), min_size=3, max_size=30), st.sampled_from(["two-sided", "deteriorating", "improving"]))
    def test_p_in_unit_interval(self, gaps, alt):
        t = np.cumsum(gaps)
        h = one(t, t[-1] + 0.5)
        for name in ("laplace", "military-handbook", "mann"):
            assert 0.0 <= TESTS[name](h, alternative=alt).p_value <= 1.0
        assert 0.0 <= anderson_darling(h).p_value <= 1.0


class TestPower:
    def test_laplace_power_against_power_law(self):
        # m = 1, Lambda(tau) = 30 with b = 2
        tau = math.sqrt(30.0)
        reps = 2000
        rej = 0
        with warnings.catch_warnings():
            for r in range(reps):
                h = simulate(SimulationPlan(TRPModel.nhpp(PowerLaw(1.0, 2.0)), 1, tau, seed=r))[0]
                rej += laplace(h).p_value < 0.05
        assert rej / reps > 0.8
