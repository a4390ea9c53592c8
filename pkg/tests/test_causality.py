import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from ggc.causality import (
    affine_invariance_check,
    dual_regression_all_pairs,
    dual_regression_gc_time,
    gc_all_pairs_spectral,
    gc_all_pairs_time,
    gc_spectral_exact,
    gc_time_exact,
    rescale_model,
    single_regression_gc,
)
from ggc.errors import UnstableFit
from ggc.var import TimeSeries, random_var_model, simulate_var, simulate_var_batch, validate_and_build_model, var_spectrum, var_transfer
from ggc.whittle import gc_time_via_whittle

LN125 = np.log(1.25)


def _bivariate_geweke(model, source, target, n_freq):
    """Direct spectral-matrix formula for the unconditional bivariate measure."""
    s = var_spectrum(model, n_freq)
    H = var_transfer(model.coeffs, s.grid)
    sig = model.sigma
    partial = sig[source, source] - sig[source, target] ** 2 / sig[target, target]
    sii = s.values[:, target, target].real
    return np.log(sii) - np.log(sii - np.abs(H[:, target, source]) ** 2 * partial)


def _min_phase_intrinsic(model, source, target):
    """True when H_tt + H_ts Sigma_st / Sigma_tt has no winding about zero."""
    w = np.linspace(-np.pi, np.pi, 8193)
    H = var_transfer(model.coeffs, w)
    sig = model.sigma
    h = H[:, target, target] + H[:, target, source] * sig[source, target] / sig[target, target]
    ph = np.unwrap(np.angle(h))
    return abs(ph[-1] - ph[0]) < np.pi


class TestExactTime:
    def test_independent(self, independent_model):
        assert abs(gc_time_exact(independent_model, 0, 1)) < 1e-12
        assert abs(gc_time_exact(independent_model, 1, 0)) < 1e-12

    def test_closed_form(self, ln125_model):
        assert gc_time_exact(ln125_model, 1, 0) == pytest.approx(LN125, abs=1e-10)
        assert abs(gc_time_exact(ln125_model, 0, 1)) < 1e-12

    def test_index_errors(self, chain_model):
        with pytest.raises(IndexError):
            gc_time_exact(chain_model, 1, 1)
        with pytest.raises(IndexError):
            gc_time_exact(chain_model, 0, 3)
        with pytest.raises(IndexError):
            gc_time_exact(chain_model, 0, 1, conditioning=[0])

    def test_chain_conditional_null(self, chain_model):
        assert abs(gc_time_exact(chain_model, 0, 2)) < 1e-10
        # without conditioning on the mediator the indirect link shows up
        assert gc_time_exact(chain_model, 0, 2, conditioning=[]) > 0.01

    def test_all_pairs_agree(self, chain_model):
        F = gc_all_pairs_time(chain_model).F
        for j in range(3):
            for i in range(3):
                if i != j:
                    assert F[i, j] == pytest.approx(gc_time_exact(chain_model, j, i), abs=1e-12)
        assert np.all(np.diag(F) == 0)

    def test_three_independent(self):
        m = validate_and_build_model([np.diag([0.5, -0.3, 0.8])], np.diag([1.0, 2.0, 0.5]))
        assert np.abs(gc_all_pairs_time(m).F).max() < 1e-12

    @pytest.mark.parametrize("cond", [[], [2], [2, 3]])
    def test_explicit_conditioning_vs_whittle(self, cond):
        model = random_var_model(4, 2, 0.85, np.random.default_rng(17))
        assert gc_time_exact(model, 1, 0, cond) == pytest.approx(gc_time_via_whittle(model, 1, 0, cond), abs=1e-8)

    def test_block_target(self):
        model = random_var_model(4, 2, 0.85, np.random.default_rng(3))
        val = gc_time_exact(model, [2, 3], [0, 1])
        assert val == pytest.approx(gc_time_via_whittle(model, [2, 3], [0, 1]), abs=1e-8)
        assert val > 0


class TestExactSpectral:
    def test_flat_closed_form(self, ln125_model):
        _, f = gc_spectral_exact(ln125_model, 1, 0, n_freq=64)
        assert np.abs(f - LN125).max() < 1e-10

    def test_null_link(self, ln125_model, chain_model):
        _, f = gc_spectral_exact(ln125_model, 0, 1, n_freq=64)
        assert np.abs(f).max() < 1e-10
        for (j, i) in [(0, 2), (1, 0), (2, 0), (2, 1)]:
            _, f = gc_spectral_exact(chain_model, j, i, n_freq=128)
            assert np.abs(f).max() < 1e-10

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_direct_bivariate_formula(self, seed):
        model = random_var_model(2, 3, 0.9, np.random.default_rng(seed))
        for j, i in [(0, 1), (1, 0)]:
            _, f = gc_spectral_exact(model, j, i, n_freq=257)
            np.testing.assert_allclose(f, _bivariate_geweke(model, j, i, 257), atol=1e-10)

    def test_all_pairs_matches_single_pair(self, chain_model):
        res = gc_all_pairs_spectral(chain_model, 64)
        for j in range(3):
            for i in range(3):
                if i != j:
                    _, f = gc_spectral_exact(chain_model, j, i, n_freq=64)
                    np.testing.assert_allclose(res.f[i, j], f, atol=1e-12)

    def test_integral_identity_ln125(self, ln125_model):
        g, f = gc_spectral_exact(ln125_model, 1, 0, n_freq=4096)
        assert np.trapezoid(f, g) / np.pi == pytest.approx(LN125, rel=1e-4)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 3), rho=st.floats(0.3, 0.95))
    def test_integral_identity_bivariate(self, seed, p, rho):
        model = random_var_model(2, p, rho, np.random.default_rng(seed))
        for j, i in [(0, 1), (1, 0)]:
            g, f = gc_spectral_exact(model, j, i, n_freq=4096)
            F = gc_time_exact(model, j, i)
            integral = np.trapezoid(f, g) / np.pi
            # Kolmogorov bound always; equality when the intrinsic filter is minimum-phase
            assert integral <= F + 1e-4 * max(F, 1e-6)
            if _min_phase_intrinsic(model, j, i):
                assert abs(integral - F) / max(F, 1e-6) < 1e-4

    def test_conditional_integral_sp(self, chain_model):
        res = gc_all_pairs_spectral(chain_model, 4096)
        F = gc_all_pairs_time(chain_model).F
        integral = np.trapezoid(res.f, res.grid, axis=-1) / np.pi
        np.testing.assert_allclose(integral, F, atol=1e-4)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4))
    def test_nonnegative(self, seed, n):
        model = random_var_model(n, 2, 0.9, np.random.default_rng(seed))
        res = gc_all_pairs_spectral(model, 128)
        assert res.raw_min >= -1e-10
        assert res.f.min() >= 0


class TestSingleRegression:
    def test_consistency_ln125(self, ln125_model):
        ts = simulate_var(ln125_model, 100_000, seed=4)
        tres, sres = single_regression_gc(ts, 1, n_freq=64)
        assert tres.F[0, 1] == pytest.approx(LN125, rel=0.05)
        assert tres.method == "single-regression-estimated"
        assert sres.f.shape == (2, 2, 64)

    def test_nonnegative_many(self, chain_model):
        for ts in simulate_var_batch(chain_model, 300, list(range(60))):
            tres, sres = single_regression_gc(ts, 3, n_freq=64)
            assert tres.F.min() >= 0 and sres.f.min() >= 0
            assert tres.raw_min >= -1e-10 and sres.raw_min >= -1e-10

    def test_white_noise_bias_scale(self):
        m = validate_and_build_model([np.zeros((3, 3))], np.eye(3))
        T, p = 500, 3
        vals = [single_regression_gc(ts, p, n_freq=None).F[1, 0]
                for ts in simulate_var_batch(m, T, list(range(300)))]
        assert 0 < np.median(vals) < 3 * 3 * p / T

    def test_unstable_fit(self):
        x = np.cumsum(np.random.default_rng(0).standard_normal((2, 400)), axis=1) + np.arange(400)
        ts = TimeSeries(np.vstack([x[0], x[0] ** 1.5 / 50 + x[1]]))
        with pytest.raises(UnstableFit):
            single_regression_gc(ts, 1, n_freq=None)


class TestDualRegression:
    def test_population_limit(self, chain_model):
        # population autocovariances + large reduced order: dual -> exact
        for j, i in [(0, 1), (1, 2), (0, 2)]:
            dual_pop = gc_time_via_whittle(chain_model, j, i, order=400)
            assert dual_pop == pytest.approx(gc_time_exact(chain_model, j, i), abs=1e-6)

    def test_population_true_order_is_biased(self, chain_model):
        # reduced process is VARMA, so an order-3 reduced model overstates F
        assert gc_time_via_whittle(chain_model, 0, 1, order=3) > gc_time_exact(chain_model, 0, 1) + 0.05

    def test_white_noise_finite_sample(self):
        m = validate_and_build_model([np.zeros((3, 3))], np.eye(3))
        T, p, n = 500, 3, 3
        vals = np.array([dual_regression_gc_time(ts, p, p, 0, 1)
                         for ts in simulate_var_batch(m, T, list(range(1500)))])
        assert np.all(vals != 0) and vals.min() < 0 < vals.max()
        # the null statistic is a monotone map of an F(p, N - n p) variate
        N = T - p
        d = N - n * p
        predicted = np.log1p(p * scipy.stats.f.median(p, d) / d) + np.log(d / (d + p))
        assert np.median(vals) == pytest.approx(predicted, abs=4e-4)

    def test_all_pairs_matches_single(self, chain_model):
        ts = simulate_var(chain_model, 600, seed=9)
        F = dual_regression_all_pairs(ts, 3).F
        for j in range(3):
            for i in range(3):
                if i != j:
                    assert F[i, j] == pytest.approx(dual_regression_gc_time(ts, 3, 3, j, i), abs=1e-12)

    def test_worse_than_single_on_varma_reduced(self, chain_model):
        exact = gc_all_pairs_time(chain_model).F
        single, dual = [], []
        for ts in simulate_var_batch(chain_model, 500, list(range(200))):
            single.append(single_regression_gc(ts, 3, n_freq=None).F)
            dual.append(dual_regression_all_pairs(ts, 3).F)
        for j, i in [(0, 1), (1, 2)]:
            b_single = abs(np.median([s[i, j] for s in single]) - exact[i, j])
            b_dual = abs(np.median([d[i, j] for d in dual]) - exact[i, j])
            assert b_single < b_dual


class TestInvariance:
    def test_identity(self, chain_model):
        assert affine_invariance_check(chain_model, [1, 1, 1]) == 0.0

    def test_rescaling(self, chain_model):
        assert affine_invariance_check(chain_model, [2, 0.5, 10]) < 1e-10

    def test_negative_factors(self):
        model = random_var_model(3, 2, 0.9, np.random.default_rng(5))
        assert affine_invariance_check(model, [-3, 0.1, 7]) < 1e-10

    def test_zero_rejected(self, chain_model):
        with pytest.raises(ValueError):
            affine_invariance_check(chain_model, [1, 0, 1])

    def test_rescaled_model(self, chain_model):
        scaled = rescale_model(chain_model, [2, 0.5, 10])
        np.testing.assert_allclose(np.diag(scaled.sigma), [4, 0.25, 100])
        assert scaled.rho == pytest.approx(chain_model.rho, abs=1e-12)
