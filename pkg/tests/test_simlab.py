import json

import numpy as np
import pytest

from cpi.data import RngStream, Task
from cpi.simlab import (ConfigError, ExperimentConfig, FdrStudyConfig, Response, SimDesign,
                        bundled_config, config_from_dict, false_discovery_proportion,
                        gen_dataset, interquartile_sign, load_config, run_error_study,
                        run_fdr_study, true_positive_proportion)

SMALL = SimDesign(n=120, p=4, rho=0.5, beta=(0.0, 0.0, 0.5, 1.0))


def _small_fdr(**kw):
    base = dict(n=60, p=16, k_nonzero=4, effects=(1.5,), rhos=(0.0,), replications=3,
                learner="ols", resampling="kfold:3", att_cv_folds=3, shrinkage="ledoit_wolf")
    base.update(kw)
    return FdrStudyConfig(**base)


class TestGenerator:
    def test_ar1_covariance(self):
        d = SimDesign(n=100_000, p=5, rho=0.5, beta=(0,) * 5)
        z = gen_dataset(d, RngStream(0))
        emp = np.cov(z.x, rowvar=False)
        # sample covariance SE for unit-variance normals: sqrt((1 + s_ij^2) / n)
        se = np.sqrt((1 + d.sigma ** 2) / d.n)
        assert np.all(np.abs(emp - d.sigma) < 3 * se + 1e-3)

    def test_rho_zero_uncorrelated(self):
        d = SimDesign(n=20_000, p=4, rho=0.0, beta=(0,) * 4)
        c = np.corrcoef(gen_dataset(d, RngStream(1)).x, rowvar=False)
        assert np.abs(c - np.eye(4)).max() < 4 / np.sqrt(d.n)

    def test_interquartile_sign(self):
        np.testing.assert_array_equal(interquartile_sign(np.array([0.0, 0.6, -0.6, 3.0])),
                                      [1.0, 1.0, 1.0, -1.0])
        g = np.random.default_rng(0).standard_normal(200_000)
        assert abs(interquartile_sign(g).mean()) < 0.01

    def test_linear_response_noise(self):
        d = SimDesign(n=50_000, p=2, rho=0.0, beta=(1.0, 0.0), noise_sd=2.0)
        z = gen_dataset(d, RngStream(2))
        assert np.std(z.y - z.x[:, 0]) == pytest.approx(2.0, rel=0.02)

    @pytest.mark.parametrize("resp", [Response.BINARY_LINEAR, Response.BINARY_NONLINEAR])
    def test_binary_is_zero_one(self, resp):
        d = SimDesign(n=500, p=3, rho=0.2, beta=(1.0, 0.0, -1.0), response=resp)
        z = gen_dataset(d, RngStream(3))
        assert z.task is Task.BINARY_CLASSIFICATION
        assert set(np.unique(z.y)) <= {0.0, 1.0}

    def test_reproducible(self):
        a, b = gen_dataset(SMALL, RngStream(5)), gen_dataset(SMALL, RngStream(5))
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)

    @pytest.mark.parametrize("kw", [dict(p=3), dict(rho=1.0), dict(noise_sd=0.0),
                                    dict(response="cubic"), dict(n=1)])
    def test_design_validation(self, kw):
        base = dict(n=10, p=4, beta=(0, 0, 0, 1))
        base.update(kw)
        with pytest.raises(ConfigError):
            SimDesign(**base)


class TestErrorStudy:
    def test_shapes_and_rows(self):
        cfg = ExperimentConfig(design=SMALL, replications=5, true_cpi=(0, 0, 0.1, 0.5))
        res = run_error_study(cfg)
        assert res.p_values.shape == (5, 4) and res.replications == 5
        rows = res.rows()
        assert len(rows) == 12
        assert {r["metric"] for r in rows} == {"rejection_rate", "mean_cpi", "coverage"}

    def test_single_replication_rates_binary(self):
        cfg = ExperimentConfig(design=SMALL, replications=1, true_cpi=(0,) * 4)
        res = run_error_study(cfg)
        assert set(res.rejection_rate) <= {0.0, 1.0}
        assert set(res.coverage) <= {0.0, 1.0}

    def test_seed_and_threads_reproducible(self):
        cfg = ExperimentConfig(design=SMALL, replications=6, true_cpi=(0,) * 4)
        a = run_error_study(cfg)
        b = run_error_study(cfg, threads=3)
        np.testing.assert_array_equal(a.p_values, b.p_values)
        np.testing.assert_array_equal(a.cpi, b.cpi)
        c = run_error_study(ExperimentConfig(design=SMALL, replications=6, seed=7,
                                             true_cpi=(0,) * 4))
        assert not np.array_equal(a.p_values, c.p_values)

    def test_strong_feature_detected(self):
        cfg = ExperimentConfig(design=SMALL, replications=20, true_cpi=(0,) * 4)
        res = run_error_study(cfg)
        assert res.rejection_rate[3] >= 0.9
        assert res.mean_cpi[3] > res.mean_cpi[0]

    def test_reference_cpi_linear_oracle(self):
        # For OLS with mean-zero knockoffs the population CPI of feature j is
        # 2 s_j beta_j^2 with s the equicorrelated knockoff parameter; the
        # estimation error of the fitted beta adds a small positive bias.
        from cpi.knockoffs import equicorrelated_s
        from cpi.simlab import reference_cpi
        d = SimDesign(n=1000, p=3, rho=0.5, beta=(0.0, 0.5, 1.0))
        ref = reference_cpi(ExperimentConfig(design=d, reference_n=200_000, reference_fits=4))
        s = equicorrelated_s(d.sigma)
        expected = 2 * s * np.array(d.beta) ** 2
        np.testing.assert_allclose(ref, expected, atol=0.02)

    def test_nonlinear_design_hides_signal_from_ols(self):
        d = SimDesign(n=300, p=2, rho=0.0, beta=(0.0, 1.0), response="nonlinear")
        res = run_error_study(ExperimentConfig(design=d, replications=30, true_cpi=(0, 0)))
        assert res.rejection_rate[1] <= 0.3

    def test_progress_callback(self):
        seen = []
        run_error_study(ExperimentConfig(design=SMALL, replications=3, true_cpi=(0,) * 4),
                        progress=seen.append)
        assert sorted(seen) == [0, 1, 2]


class TestFdrStudy:
    def test_proportions(self):
        assert false_discovery_proportion([], [1, 2]) == 0
        assert false_discovery_proportion([1, 5], [1, 2]) == 0.5
        assert true_positive_proportion([1, 5], [1, 2]) == 0.5
        assert true_positive_proportion([3], []) == 0

    def test_aggregates_recompute_from_selections(self):
        cfg = _small_fdr()
        res = run_fdr_study(cfg)
        assert len(res.replications[0]) == 3
        for m in ("cpi", "att"):
            reps = res.replications[0]
            fdp = [false_discovery_proportion(r.selected[m], r.support) for r in reps]
            tpp = [true_positive_proportion(r.selected[m], r.support) for r in reps]
            assert res.metric(m, 0) == (pytest.approx(np.mean(tpp)), pytest.approx(np.mean(fdp)))
            for r in reps:
                assert len(r.support) == cfg.k_nonzero
                assert all(0 <= j < cfg.p for j in r.selected[m])

    def test_zero_support_means_zero_power(self):
        res = run_fdr_study(_small_fdr(k_nonzero=0, replications=2))
        for m in ("cpi", "att"):
            power, _ = res.metric(m, 0)
            assert power == 0

    def test_grid_and_threads(self):
        cfg = _small_fdr(effects=(1.0, 2.0), rhos=(0.0, 0.3), replications=2)
        a = run_fdr_study(cfg)
        assert len(a.cells) == 4 and len(a.rows()) == 8
        b = run_fdr_study(cfg, threads=2)
        assert a.rows() == b.rows()

    @pytest.mark.parametrize("kw", [dict(k_nonzero=17), dict(q=1.0), dict(replications=0),
                                    dict(rhos=()), dict(rhos=(1.2,)), dict(shrinkage="oas"),
                                    dict(learner="svm"), dict(resampling="boot")])
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            _small_fdr(**kw)


class TestConfigs:
    def test_bundled_error_config(self):
        cfg = load_config(bundled_config("error_linear.json"))
        assert isinstance(cfg, ExperimentConfig)
        assert cfg.design == SimDesign()
        assert cfg.replications == 500 and cfg.seed == 42 and cfg.resampling == "holdout:1/3"

    def test_bundled_fdr_config(self):
        cfg = load_config(bundled_config("fdr_desk.json"))
        assert isinstance(cfg, FdrStudyConfig)
        assert (cfg.n, cfg.p, cfg.q) == (150, 300, 0.1)

    def test_round_trip(self):
        for cfg in (ExperimentConfig(design=SMALL, replications=3), _small_fdr()):
            d = json.loads(json.dumps(cfg.to_dict()))
            assert config_from_dict(d).to_dict() == cfg.to_dict()

    @pytest.mark.parametrize("raw", ['{"study": "other"}', '{"replications": 3}', '[1, 2]',
                                     '{"study": "error", "bogus": 1}',
                                     '{"study": "error", "design": {"p": 2}}', '{not json'])
    def test_malformed(self, tmp_path, raw):
        p = tmp_path / "c.json"
        p.write_text(raw)
        with pytest.raises(ConfigError):
            load_config(p)
