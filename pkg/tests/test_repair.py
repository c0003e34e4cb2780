import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from repairable import _kernels_py
from repairable.errors import DataError, DomainError
from repairable.events import SystemHistory
from repairable.repair import (
    AgeReductionFull,
    AgeReductionIncrement,
    BernoulliComplement,
    BetaD,
    BrownProschan,
    KijimaI,
    KijimaII,
    Minimal,
    Perfect,
    PointMass,
    UniformD,
    effects_from_marks,
    policy_from_name,
    post_repair_ages,
    resolve_effects,
    virtual_age,
)

H = SystemHistory("s", [2.0, 5.0], 10.0)
gap_lists = st.lists(st.floats(1e-3, 10.0), min_size=1, max_size=20)


def reference_ages(policy, x, d):
    """Plain recursion written out independently of the kernels."""
    v = [0.0]
    for xi, di in zip(x, d):
        prev = v[-1]
        if isinstance(policy, Perfect):
            v.append(0.0)
        elif isinstance(policy, Minimal):
            v.append(prev + xi)
        elif isinstance(policy, KijimaI):
            v.append(prev + di * xi)
        elif isinstance(policy, KijimaII):
            v.append(di * (prev + xi))
        elif isinstance(policy, AgeReductionFull):
            v.append((1 - policy.rho) * (prev + xi))
        else:
            v.append(prev + (1 - policy.rho) * xi)
    return np.array(v)


class TestExamples:
    def test_perfect(self):
        assert virtual_age(Perfect(), H, 6.0) == 1.0

    def test_minimal(self):
        assert virtual_age(Minimal(), H, 6.0) == 6.0

    def test_kijima(self):
        x, d = [2.0, 3.0], [0.5, 0.5]
        np.testing.assert_allclose(post_repair_ages(KijimaI(UniformD()), x, d), [0, 1.0, 2.5])
        v2 = post_repair_ages(KijimaII(UniformD()), x, d)[-1]
        assert v2 == pytest.approx(0.5 * 0.5 * 2 + 0.5 * 3) and v2 == pytest.approx(2.0)

    def test_age_reduction_full(self):
        np.testing.assert_allclose(post_repair_ages(AgeReductionFull(0.5), [2.0, 3.0], [0, 0]), [0, 1.0, 2.0])

    def test_left_limit_at_event(self):
        # at an event instant the age is the pre-repair age
        assert virtual_age(Perfect(), H, 5.0) == 3.0

    def test_missing_effects(self):
        h = SystemHistory("s", [1.0], 2.0)
        with pytest.raises(DataError, match="repair effects"):
            resolve_effects(KijimaI(UniformD()), h)

    def test_effects_from_marks(self):
        np.testing.assert_array_equal(effects_from_marks(["perfect", "minimal", "0.25"]), [0, 1, 0.25])
        with pytest.raises(DataError):
            effects_from_marks(["1.5"])

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2])
    def test_rho_domain(self, bad):
        with pytest.raises(DomainError):
            AgeReductionFull(bad)

    def test_dlaw_domains(self):
        with pytest.raises(DomainError):
            PointMass(1.2)
        with pytest.raises(DomainError):
            BernoulliComplement(-0.1)
        with pytest.raises(DomainError):
            BetaD(0, 1)

    def test_by_name(self):
        assert isinstance(policy_from_name("bp", p=0.3), BrownProschan)
        assert policy_from_name("kijima2", d="0.4").dlaw == PointMass(0.4)
        with pytest.raises(DomainError):
            policy_from_name("magic")


class TestBoundaryEquivalences:
    @given(gap_lists)
    def test_bp_one_is_perfect(self, x):
        d = BrownProschan(1.0).default_effects(len(x))
        np.testing.assert_array_equal(post_repair_ages(BrownProschan(1.0), x, d), post_repair_ages(Perfect(), x, d))

    @given(gap_lists)
    def test_bp_zero_is_minimal(self, x):
        d = BrownProschan(0.0).default_effects(len(x))
        np.testing.assert_allclose(post_repair_ages(BrownProschan(0.0), x, d), np.concatenate([[0], np.cumsum(x)]), rtol=1e-13)

    @given(gap_lists)
    def test_kijima_one_is_minimal_zero_is_perfect(self, x):
        n = len(x)
        for cls in (KijimaI, KijimaII):
            np.testing.assert_allclose(post_repair_ages(cls(PointMass(1.0)), x, np.ones(n)), np.concatenate([[0], np.cumsum(x)]), rtol=1e-13)
            np.testing.assert_array_equal(post_repair_ages(cls(PointMass(0.0)), x, np.zeros(n)), np.zeros(n + 1))

    @pytest.mark.parametrize(
        "policy", [Perfect(), Minimal(), KijimaI(UniformD()), KijimaII(UniformD()), AgeReductionFull(0.3), AgeReductionIncrement(0.6)]
    )
    @given(x=gap_lists, seed=st.integers(0, 2**32 - 1))
    def test_matches_reference_and_python_kernel(self, policy, x, seed):
        d = np.random.default_rng(seed).random(len(x))
        v = post_repair_ages(policy, x, d)
        np.testing.assert_allclose(v, reference_ages(policy, x, d), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(v, _kernels_py.virtual_ages(np.asarray(x), d, policy.kind, policy.rho), rtol=1e-15)
        assert np.all(v >= 0)

    @given(gap_lists, st.floats(0.05, 0.9))
    def test_age_path_unit_slope(self, x, frac):
        t = np.cumsum(x)
        h = SystemHistory("s", t, t[-1] + 1.0)
        pol = AgeReductionFull(0.4)
        # strictly between two events the age grows with slope one
        nxt = x[1] if len(x) > 1 else 1.0
        lo = t[0] + frac * nxt
        hi = lo + 0.05 * nxt
        assert virtual_age(pol, h, hi) - virtual_age(pol, h, lo) == pytest.approx(hi - lo, rel=1e-6, abs=1e-12)
