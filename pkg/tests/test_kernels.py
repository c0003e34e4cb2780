import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from repairable import _core, _kernels_py

compiled = pytest.importorskip("repairable._kernels")

gaps = st.lists(st.floats(1e-3, 10.0), max_size=40)
kinds = st.integers(0, 5)
rhos = st.floats(0.0, 0.99)


class TestBackends:
    def test_compiled_selected_by_default(self):
        if os.environ.get("REPAIRABLE_PURE_PYTHON", "") in ("", "0"):
            assert _core.BACKEND == "cython"

    def test_environment_forces_fallback(self):
        code = "import repairable._core as c; print(c.BACKEND)"
        env = {**os.environ, "REPAIRABLE_PURE_PYTHON": "1"}
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"


class TestEquivalence:
    @given(gaps, kinds, rhos, st.data())
    def test_virtual_ages(self, x, kind, rho, data):
        d = data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(x), max_size=len(x)))
        a = compiled.virtual_ages(x, d, kind, rho)
        b = _kernels_py.virtual_ages(x, d, kind, rho)
        np.testing.assert_array_equal(a, b)

    @given(st.lists(st.floats(1e-6, 5.0), min_size=1, max_size=40), kinds, rhos, st.floats(0.3, 4.0),
           st.floats(0.2, 3.0), st.floats(0.5, 2.0), st.floats(0.1, 3.0), st.floats(0.5, 30.0), st.data())
    def test_simulate_va_weibull(self, e, kind, rho, shape, scale, c, mult, tau, data):
        d = data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(e), max_size=len(e)))
        a = compiled.simulate_va_weibull(e, d, kind, rho, shape, scale, c, mult, tau, 0.0, 0.0)
        b = _kernels_py.simulate_va_weibull(e, d, kind, rho, shape, scale, c, mult, tau, 0.0, 0.0)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-13)
        assert a[1] == b[1] and a[4] == b[4]
        assert a[2] == pytest.approx(b[2], rel=1e-12, abs=1e-15) and a[3] == pytest.approx(b[3], rel=1e-13)

    @given(st.lists(st.integers(0, 20).map(float), max_size=60))
    def test_mann_count(self, x):
        assert compiled.mann_count(x) == _kernels_py.mann_count(x)
        n = len(x)
        brute = sum(1 for i in range(n) for j in range(i + 1, n) if x[i] < x[j])
        assert compiled.mann_count(x) == brute

    @pytest.mark.parametrize("mod", [compiled, _kernels_py], ids=["cython", "python"])
    def test_unknown_kind(self, mod):
        with pytest.raises(ValueError):
            mod.virtual_ages([1.0], [0.5], 9, 0.0)

    def test_chunked_continuation(self):
        # two chunks of draws continue exactly where one long chunk would
        rng = np.random.default_rng(0)
        e, d = rng.exponential(size=200), rng.uniform(size=200)
        args = (2, 0.3, 2.0, 1.0, 1.0, 1.0, 50.0)
        whole = compiled.simulate_va_weibull(e, d, *args, 0.0, 0.0)
        first = compiled.simulate_va_weibull(e[:7], d[:7], *args, 0.0, 0.0)
        second = compiled.simulate_va_weibull(e[7:], d[7:], *args, first[2], first[3])
        np.testing.assert_array_equal(np.concatenate([first[0], second[0]]), whole[0])


def test_simulated_dataset_identical_across_backends(tmp_path):
    argv = ["simulate", "--model", "virtual-age", "--renewal", "weibull:s=2,c=1", "--policy", "kijima2:d=uniform",
            "--systems", "30", "--tau", "20", "--seed", "5"]
    outs = []
    for flag in ("0", "1"):
        out = tmp_path / flag
        env = {**os.environ, "REPAIRABLE_PURE_PYTHON": flag}
        subprocess.run([sys.executable, "-m", "repairable.cli", *argv, "--out", str(out)], env=env, check=True,
                       capture_output=True)
        outs.append((out / "events.csv").read_text())
    a = [line.split(",") for line in outs[0].splitlines()[1:]]
    b = [line.split(",") for line in outs[1].splitlines()[1:]]
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert ra[0] == rb[0] and ra[2] == rb[2]
        assert float(ra[1]) == pytest.approx(float(rb[1]), rel=1e-12)
