import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize, special, stats

from repairable.distributions import (
    DegenerateFrailty,
    Exponential,
    Gamma,
    GammaFrailty,
    Lifetime,
    Weibull,
    frailty_from_variance,
    frailty_quadrature,
    renewal_from_name,
)
from repairable.errors import DomainError, NumericalError

GRID = (0.5, 1.0, 2.0, 5.0)
FAMILIES = [Exponential()] + [Weibull(s) for s in GRID] + [Gamma(g) for g in GRID]


def scipy_twin(dist):
    """Independent scipy.stats parameterization of the same unit-mean law."""
    if isinstance(dist, Weibull):
        s = dist.shape
        return stats.weibull_min(s, scale=1.0 / special.gamma(1.0 + 1.0 / s))
    if isinstance(dist, Gamma):
        return stats.gamma(1.0 / dist.variance, scale=dist.variance)
    return stats.expon()


class TestPointValues:
    def test_exponential_hazard_is_one(self):
        np.testing.assert_array_equal(Exponential().hazard(np.array([0.0, 0.3, 7.0])), 1.0)

    def test_weibull2_hazard_at_one(self):
        # z(t) = (s/a)(t/a)^(s-1) with a = 1/Gamma(1.5) = 2/sqrt(pi)
        a = 2.0 / math.sqrt(math.pi)
        assert Weibull(2.0).hazard(1.0) == pytest.approx(2.0 / a * (1.0 / a), rel=1e-14)
        assert Weibull(2.0).hazard(1.0) == pytest.approx(math.pi / 2, rel=1e-14)

    def test_weibull2_hazard_matches_finite_difference(self):
        w = Weibull(2.0)
        h = 1e-6
        fd = (-math.log(w.sf(1 + h)) + math.log(w.sf(1 - h))) / (2 * h)
        assert w.hazard(1.0) == pytest.approx(fd, rel=1e-8)

    def test_gamma_one_is_exponential(self):
        assert Gamma(1.0).cdf(1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)

    def test_weibull_scale(self):
        assert Weibull(2.0).scale == pytest.approx(2 / math.sqrt(math.pi), rel=1e-15)

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    @pytest.mark.parametrize("cls", [Weibull, Gamma])
    def test_invalid_parameters(self, cls, bad):
        with pytest.raises(DomainError):
            cls(bad)

    @pytest.mark.parametrize("u", [-0.1, 1.0, 1.5])
    def test_quantile_domain(self, u):
        with pytest.raises(DomainError):
            Weibull(2.0).quantile(u)

    def test_by_name(self):
        assert renewal_from_name("weibull", s=3.0) == Weibull(3.0)
        assert renewal_from_name("gamma", gamma=0.5) == Gamma(0.5)
        with pytest.raises(DomainError):
            renewal_from_name("lognormal")


@pytest.mark.parametrize("dist", FAMILIES, ids=repr)
class TestAgainstScipy:
    t = np.geomspace(1e-3, 8.0, 40)

    def test_cdf_pdf(self, dist):
        ref = scipy_twin(dist)
        np.testing.assert_allclose(dist.cdf(self.t), ref.cdf(self.t), rtol=1e-11, atol=1e-300)
        np.testing.assert_allclose(dist.pdf(self.t), ref.pdf(self.t), rtol=1e-10)

    def test_logsf(self, dist):
        np.testing.assert_allclose(dist.logsf(self.t), scipy_twin(dist).logsf(self.t), rtol=1e-10)

    def test_hazard_times_survival_is_pdf(self, dist):
        np.testing.assert_allclose(dist.hazard(self.t) * dist.sf(self.t), dist.pdf(self.t), rtol=1e-12)

    def test_quantile_inverts_cdf(self, dist):
        # restricted to where the double-precision cdf still resolves t
        t = self.t[dist.sf(self.t) > 1e-4]
        np.testing.assert_allclose(dist.quantile(dist.cdf(t)), t, rtol=1e-10, atol=1e-12)

    def test_unit_mean(self, dist):
        hi = float(dist.quantile(1 - 1e-12))
        m, _ = integrate.quad(lambda x: x * dist.pdf(x), 0, hi, limit=400, points=[1.0])
        assert m == pytest.approx(1.0, abs=1e-6)

    def test_cumhaz_monotone_from_zero(self, dist):
        z = dist.cumhaz(np.concatenate([[0.0], self.t]))
        assert z[0] == 0.0 and np.all(np.diff(z) >= 0)

    def test_hazard_is_derivative_of_cumhaz(self, dist):
        t = np.geomspace(1e-2, 5.0, 25)
        h = 1e-5 * t
        fd = (dist.cumhaz(t + h) - dist.cumhaz(t - h)) / (2 * h)
        np.testing.assert_allclose(fd, dist.hazard(t), rtol=1e-6)

    def test_cumhaz_inverse(self, dist):
        y = np.geomspace(1e-8, 30.0, 30)
        np.testing.assert_allclose(dist.cumhaz(dist.cumhaz_inverse(y)), y, rtol=1e-10)

    def test_conditional_quantile_at_zero_age(self, dist):
        u = np.linspace(0, 0.99, 12)
        np.testing.assert_allclose(dist.conditional_quantile(0.0, u), dist.quantile(u), rtol=1e-12, atol=1e-14)

    def test_conditional_quantile_identity(self, dist):
        v, u = 0.8, np.linspace(0.01, 0.95, 10)
        x = dist.conditional_quantile(v, u)
        fv = (dist.cdf(v + x) - dist.cdf(v)) / dist.sf(v)
        np.testing.assert_allclose(fv, u, atol=1e-10)


class TestConditionalQuantile:
    @given(st.floats(0, 50), st.floats(0, 0.999))
    def test_exponential_memoryless(self, v, u):
        assert Exponential().conditional_quantile(v, u) == pytest.approx(-math.log1p(-u), rel=1e-12, abs=1e-15)

    def test_weibull2_example(self):
        # (pi/4)((1+x)^2 - 1) = log 2, checked against an independent bisection
        closed = math.sqrt(1 + 4 * math.log(2) / math.pi) - 1
        bis = optimize.bisect(lambda x: math.pi / 4 * ((1 + x) ** 2 - 1) - math.log(2), 0, 2, xtol=1e-15)
        x = Weibull(2.0).conditional_quantile(1.0, 0.5)
        assert x == pytest.approx(closed, abs=1e-12)
        assert x == pytest.approx(bis, abs=1e-12)
        assert x == pytest.approx(0.37206, abs=1e-5)

    def test_underflow_raises(self):
        with pytest.raises(NumericalError, match="degenerate conditional distribution"):
            Weibull(3.0).conditional_quantile(1e4, 0.5)

    def test_sampling_distribution(self, ks):
        w = Weibull(2.0)
        v = 0.7
        rng = np.random.default_rng(11)
        x = w.conditional_quantile(v, rng.random(100_000))
        cdf = lambda t: (w.cdf(v + t) - w.cdf(v)) / w.sf(v)  # noqa: E731
        assert ks(x, cdf) < 0.01


class TestLifetime:
    def test_scaled_hazard(self):
        L = Lifetime(Weibull(2.0), 3.0)
        assert L.hazard(0.5) == pytest.approx(3.0 * Weibull(2.0).hazard(1.5), rel=1e-14)
        assert L.cumhaz(0.5) == pytest.approx(Weibull(2.0).cumhaz(1.5), rel=1e-14)

    def test_mean(self):
        L = Lifetime(Gamma(0.5), 4.0)
        m, _ = integrate.quad(lambda t: math.exp(L.logpdf(t)) * t, 0, 20)
        assert m == pytest.approx(0.25, rel=1e-8)

    def test_bad_rate(self):
        with pytest.raises(DomainError):
            Lifetime(Exponential(), 0.0)


class TestFrailtyQuadrature:
    def test_two_node_laguerre(self):
        a, w = frailty_quadrature(GammaFrailty(1.0), 2)
        np.testing.assert_allclose(a, [2 - math.sqrt(2), 2 + math.sqrt(2)], rtol=1e-14)
        np.testing.assert_allclose(w, [(2 + math.sqrt(2)) / 4, (2 - math.sqrt(2)) / 4], rtol=1e-14)
        # moments 0..3 of Exp(1): 1, 1, 2, 6
        for k, m in enumerate((1, 1, 2, 6)):
            assert np.sum(w * a**k) == pytest.approx(m, rel=1e-13)

    def test_one_node(self):
        a, w = frailty_quadrature(GammaFrailty(0.3), 1)
        assert a.tolist() == pytest.approx([1.0], rel=1e-15) and w.tolist() == [1.0]

    @given(st.floats(0.01, 5.0), st.integers(2, 64))
    def test_moments(self, delta, n):
        a, w = frailty_quadrature(GammaFrailty(delta), n)
        assert np.all(a > 0)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-12)
        assert np.sum(w * a) == pytest.approx(1.0, abs=1e-10)
        assert np.sum(w * a**2) == pytest.approx(1.0 + delta, rel=1e-8)

    @pytest.mark.parametrize("delta", [0.2, 1.0, 3.0])
    def test_higher_moments_exact(self, delta):
        n = 6
        a, w = frailty_quadrature(GammaFrailty(delta), n)
        k = 1.0 / delta
        for p in range(2 * n):
            exact = math.exp(special.gammaln(k + p) - special.gammaln(k) + p * math.log(delta))
            assert np.sum(w * a**p) == pytest.approx(exact, rel=1e-8)

    def test_degenerate_rejected(self):
        with pytest.raises(DomainError):
            frailty_quadrature(DegenerateFrailty(), 4)

    def test_from_variance(self):
        assert frailty_from_variance(0) == DegenerateFrailty()
        assert frailty_from_variance(0.5) == GammaFrailty(0.5)

    def test_gamma_frailty_sample_moments(self):
        a = GammaFrailty(0.5).sample(np.random.default_rng(0), 200_000)
        assert a.mean() == pytest.approx(1.0, abs=0.01)
        assert a.var() == pytest.approx(0.5, abs=0.01)
