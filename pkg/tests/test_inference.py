import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.stats.multitest import multipletests

from cpi.data import Dataset, RngStream, ar1_cov, mvn_sample
from cpi.inference import (FisherConfig, InferenceError, adjust, bh_adjust, fisher_exact_cpi,
                           holm_adjust, knockoff_filter_att, lasso_w_stats, loco, power_t, t_cdf,
                           t_quantile, t_test_cpi, wls_design, wls_test_cpi)
from cpi.knockoffs import fit_gaussian_knockoffs, sample_knockoffs
from cpi.resampling import Holdout

mpmath.mp.dps = 40


def mp_t_cdf(x, df):
    """High-precision Student t CDF via the regularized incomplete beta."""
    x, df = mpmath.mpf(x), mpmath.mpf(df)
    tail = mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, df / (df + x * x), regularized=True) / 2
    return tail if x < 0 else 1 - tail


def brute_force_fep(d):
    """Exact FEP by listing all 2^n sign assignments with rational arithmetic."""
    q = [Fraction(v) for v in d]
    obs = sum(q)
    hits = sum(1 for signs in itertools.product((1, -1), repeat=len(q))
               if sum(s * v for s, v in zip(signs, q)) >= obs)
    return Fraction(hits, 2 ** len(q))


class TestTDistribution:
    @pytest.mark.parametrize("x,df", [(1.73205, 3), (-2.5, 7), (0.3, 1), (4.0, 50), (-0.01, 999)])
    def test_cdf_vs_mpmath(self, x, df):
        assert t_cdf(x, df) == pytest.approx(float(mp_t_cdf(x, df)), abs=1e-12)

    def test_tabulated_quantile(self):
        assert t_quantile(0.95, 3) == pytest.approx(2.3534, abs=5e-5)

    def test_quantile_inverts_cdf(self):
        for df in (2, 9, 40):
            assert float(mp_t_cdf(t_quantile(0.975, df), df)) == pytest.approx(0.975, abs=1e-12)


class TestTTest:
    def test_hand_example(self):
        r = t_test_cpi([2, 0, 2, 0])
        assert r.cpi == 1
        assert r.se == pytest.approx(1 / math.sqrt(3), abs=1e-12)
        assert r.statistic == pytest.approx(math.sqrt(3), abs=1e-12)
        assert r.p_value == pytest.approx(1 - float(mp_t_cdf(math.sqrt(3), 3)), abs=1e-12)
        assert r.method == "t" and r.n_eval == 4

    def test_symmetric(self):
        r = t_test_cpi([1, -1])
        assert r.statistic == 0 and r.p_value == 0.5

    def test_normal_limit(self):
        d = np.random.default_rng(0).standard_normal(1_000_000)
        r = t_test_cpi(d, 0.05)
        assert (r.cpi - r.ci_lower) / r.se == pytest.approx(1.6449, abs=1e-4)

    @pytest.mark.parametrize("c,p", [(0.5, 0.0), (0.0, 1.0), (-2.0, 1.0)])
    def test_degenerate(self, c, p):
        r = t_test_cpi([c] * 5)
        assert r.se == 0 and r.p_value == p and r.warning
        assert r.cpi == c

    def test_needs_two(self):
        with pytest.raises(InferenceError):
            t_test_cpi([1.0])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=40), st.floats(0.01, 0.5))
    def test_invariants(self, d, alpha):
        r = t_test_cpi(d, alpha)
        assert abs(r.cpi - float(np.mean(d))) <= 1e-12 * max(1.0, float(np.max(np.abs(d))))
        assert r.ci_lower <= r.cpi + 1e-12
        assert 0 <= r.p_value <= 1


class TestFisher:
    def test_two_ones(self):
        r = fisher_exact_cpi([1, 1], FisherConfig("exact"))
        assert r.p_value == 0.25

    def test_three_minus_one(self):
        assert fisher_exact_cpi([3, -1], FisherConfig("exact")).p_value == 0.5

    def test_all_zero(self):
        assert fisher_exact_cpi([0, 0, 0], FisherConfig("exact")).p_value == 1.0

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=10))
    def test_matches_brute_force_integers(self, d):
        assert fisher_exact_cpi(d, FisherConfig("exact")).p_value == float(brute_force_fep(d))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-10, 10, allow_subnormal=False), min_size=1, max_size=10))
    def test_matches_brute_force_floats(self, d):
        assert fisher_exact_cpi(d, FisherConfig("exact")).p_value == float(brute_force_fep(d))

    def test_exact_limit(self):
        with pytest.raises(InferenceError):
            fisher_exact_cpi(np.ones(21), FisherConfig("exact"))

    def test_monte_carlo_close_to_exact(self):
        d = np.random.default_rng(3).normal(0.3, 1, 10)
        exact = fisher_exact_cpi(d, FisherConfig("exact")).p_value
        mc = fisher_exact_cpi(d, FisherConfig("monte_carlo", 100_000), RngStream(1)).p_value
        assert abs(mc - exact) <= 3 * math.sqrt(exact * (1 - exact) / 100_000)

    def test_monte_carlo_plus_one(self):
        r = fisher_exact_cpi([5.0] * 30, FisherConfig("monte_carlo", 99), RngStream(0))
        assert r.p_value == pytest.approx(1 / 100, abs=0.02)
        assert r.p_value >= 1 / 100

    def test_ci_from_null(self):
        d = np.array([2.0, 1.0, 3.0, -0.5, 1.5, 0.5])
        r = fisher_exact_cpi(d, FisherConfig("exact"), alpha=0.1)
        null = [(np.array(s) * d).mean() for s in itertools.product((1, -1), repeat=6)]
        crit = min(c for c in set(null) if np.mean(np.array(null) >= c) <= 0.1)
        assert r.ci_lower == pytest.approx(d.mean() - crit, abs=1e-12)

    def test_deterministic(self):
        d = np.random.default_rng(0).standard_normal(50)
        a = fisher_exact_cpi(d, FisherConfig(), RngStream(5))
        b = fisher_exact_cpi(d, FisherConfig(), RngStream(5))
        assert a == b


class TestWls:
    def _explicit(self, lo, lk, w):
        x, y = wls_design(lo, lk)
        sw = np.sqrt(w)
        beta, *_ = np.linalg.lstsq(x * sw[:, None], y * sw, rcond=None)
        resid = (y - x @ beta) * sw
        n = len(lo)
        sigma2 = resid @ resid / (2 * n - (n + 1))
        cov = sigma2 * np.linalg.inv((x * w[:, None]).T @ x)
        return beta[-1], beta[-1] / math.sqrt(cov[-1, -1])

    def test_hand_example(self):
        r = wls_test_cpi([1, 2], [3, 4])
        assert r.cpi == pytest.approx(2.0)

    def test_design_shape(self):
        x, y = wls_design([1, 2, 3], [4, 5, 6])
        assert x.shape == (6, 4) and y.shape == (6,)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_explicit_design(self, seed):
        g = np.random.default_rng(seed)
        lo, lk = g.exponential(size=12), g.exponential(size=12)
        w = g.uniform(0.2, 3, 24)
        gamma, stat = self._explicit(lo, lk, w)
        r = wls_test_cpi(lo, lk, w)
        assert r.cpi == pytest.approx(gamma, abs=1e-10)
        assert r.statistic == pytest.approx(stat, rel=1e-8)

    def test_unit_weights_equal_t(self):
        g = np.random.default_rng(9)
        lo, lk = g.exponential(size=30), g.exponential(size=30) + 0.2
        a = wls_test_cpi(lo, lk)
        b = t_test_cpi(lk - lo)
        assert a.cpi == pytest.approx(b.cpi, abs=1e-10)
        assert a.statistic == pytest.approx(b.statistic, abs=1e-10)
        assert a.p_value == pytest.approx(b.p_value, abs=1e-10)

    def test_scale_invariance(self):
        g = np.random.default_rng(10)
        lo, lk = g.exponential(size=8), g.exponential(size=8)
        a = wls_test_cpi(lo, lk, np.ones(16))
        b = wls_test_cpi(lo, lk, np.full(16, 7.5))
        assert a.statistic == pytest.approx(b.statistic, abs=1e-10)

    def test_bad_weights(self):
        with pytest.raises(InferenceError):
            wls_test_cpi([1, 2], [3, 4], [1, 1, 0, 1])
        with pytest.raises(InferenceError):
            wls_test_cpi([1, 2], [3, 4], [1, 1])


class TestPower:
    def test_zero_effect_is_alpha(self):
        for n in (5, 50):
            assert power_t(0.0, n, 0.05) == pytest.approx(0.05, abs=1e-12)

    def test_large_effect(self):
        assert power_t(50.0, 20) == pytest.approx(1.0, abs=1e-9)

    def test_monotone_in_n(self):
        vals = [power_t(2.0, n) for n in (3, 5, 10, 50, 200)]
        assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_monte_carlo(self):
        g = np.random.default_rng(0)
        n, delta = 30, 2.0
        mu = delta / math.sqrt(n)
        rej = np.mean([t_test_cpi(g.normal(mu, 1, n)).p_value <= 0.05 for _ in range(3000)])
        assert abs(rej - power_t(delta, n)) < 0.05


class TestAdjust:
    def test_holm_examples(self):
        np.testing.assert_allclose(holm_adjust([0.01, 0.04]), [0.02, 0.04])
        np.testing.assert_allclose(holm_adjust([0.3]), [0.3])
        np.testing.assert_allclose(holm_adjust([1, 1, 1]), [1, 1, 1])

    def test_bh_examples(self):
        np.testing.assert_allclose(bh_adjust([0.01, 0.02, 0.03, 0.04]), [0.04] * 4)
        np.testing.assert_allclose(bh_adjust([0.3]), [0.3])
        np.testing.assert_allclose(bh_adjust([0.5, 1.0]), [1.0, 1.0])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    def test_vs_statsmodels(self, p):
        np.testing.assert_allclose(holm_adjust(p), multipletests(p, method="holm")[1], atol=1e-12)
        np.testing.assert_allclose(bh_adjust(p), multipletests(p, method="fdr_bh")[1], atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    def test_properties(self, p):
        p = np.array(p)
        order = np.argsort(p, kind="stable")
        for adj in (holm_adjust(p), bh_adjust(p)):
            assert np.all(adj >= p - 1e-15) and np.all(adj <= 1)
            assert np.all(np.diff(adj[order]) >= -1e-15)

    def test_dispatch(self):
        np.testing.assert_array_equal(adjust([0.2, 0.1], "none"), [0.2, 0.1])
        with pytest.raises(InferenceError):
            adjust([0.1], "bonferroni")


class TestAtt:
    def test_example_half(self):
        r = knockoff_filter_att([3, 2, 1, -1], 0.5)
        assert r.threshold == 2 and r.selected == (0, 1)

    def test_all_nonpositive(self):
        r = knockoff_filter_att([-1, 0, -3], 0.2)
        assert r.threshold == math.inf and r.selected == ()

    def test_all_selected(self):
        r = knockoff_filter_att([5, 4, 3, 2, 1], 0.2)
        assert r.threshold == 1 and r.selected == (0, 1, 2, 3, 4)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(-6, 6), min_size=1, max_size=25), st.floats(0.05, 0.9))
    def test_brute_force(self, w, q):
        w = np.array(w, dtype=float)
        cands = sorted({abs(v) for v in w if v != 0})
        ok = [t for t in cands if (1 + np.sum(w <= -t)) / max(np.sum(w >= t), 1) <= q]
        r = knockoff_filter_att(w, q)
        assert r.threshold == (ok[0] if ok else math.inf)
        assert r.selected == tuple(int(j) for j in np.nonzero(w >= r.threshold)[0])


class TestLassoW:
    def _data(self, seed=0, n=200, p=20):
        g = np.random.default_rng(seed)
        x = g.standard_normal((n, p))
        y = x[:, :3] @ [1.0, -1.0, 1.0] + g.standard_normal(n)
        z = Dataset(x, y)
        xt = sample_knockoffs(fit_gaussian_knockoffs(x), x, RngStream(seed))
        return z, xt

    def test_large_lambda_zero(self):
        z, xt = self._data()
        np.testing.assert_array_equal(lasso_w_stats(z, xt, lam=1e6), 0)

    def test_signals_positive(self):
        z, xt = self._data()
        w = lasso_w_stats(z, xt, rng=RngStream(0))
        assert np.all(w[:3] > 0)

    def test_degenerate_copy_small(self):
        z, _ = self._data()
        w = lasso_w_stats(z, z.x + 1e-9, lam=0.05)
        assert np.max(np.abs(w[3:])) < 0.2

    def test_shape_mismatch(self):
        z, xt = self._data()
        with pytest.raises(InferenceError):
            lasso_w_stats(z, xt[:, :5])

    def test_null_symmetry(self):
        signs = []
        for seed in range(30):
            z, xt = self._data(seed, n=150, p=20)
            w = lasso_w_stats(z, xt, lam=0.02)
            signs.extend(np.sign(w[3:][w[3:] != 0]))
        signs = np.array(signs)
        # sign-flip null: positives ~ Binomial(m, 1/2)
        m = len(signs)
        assert abs(np.sum(signs > 0) - m / 2) < 3 * math.sqrt(m / 4)


class TestLoco:
    def _design(self, seed, n=300):
        g = np.random.default_rng(seed)
        x = mvn_sample(RngStream(seed), np.zeros(4), np.linalg.cholesky(ar1_cov(4, 0.5)), n)
        y = x @ [0.0, 0.0, 0.0, 0.9] + g.standard_normal(n)
        return Dataset(x, y)

    def test_strong_feature_rejected(self):
        rej = [loco(self._design(s), [3], "ols", "mse", Holdout(), RngStream(s)).p_value <= 0.05
               for s in range(20)]
        assert np.mean(rej) >= 0.9

    def test_duplicate_column_near_zero(self):
        g = np.random.default_rng(0)
        x = g.standard_normal((400, 2))
        x = np.column_stack([x, x[:, 0]])
        z = Dataset(x, x[:, 0] + g.standard_normal(400))
        r = loco(z, [2], "ridge:0.1", "mse", Holdout(), RngStream(1))
        assert abs(r.cpi) < 0.02
        assert r.method == "loco-t"

    def test_empty_reduced_set(self):
        z = Dataset(np.random.default_rng(0).standard_normal((20, 1)), np.zeros(20))
        with pytest.raises(InferenceError):
            loco(z, [0], "ols", "mse", Holdout(), RngStream(0))
