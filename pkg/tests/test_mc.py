"""Monte Carlo reference estimator: accuracy, calibration, determinism."""

from __future__ import annotations

import numpy as np
import pytest

from boxprob import (
    Gaussian,
    MarginalDistribution,
    NortaModel,
    Query,
    compute_robustness,
    mc_robustness,
    univariate_normal_cdf,
)
from conftest import leaf_model, stump_model


def gaussian_query(sample, cov):
    sample = np.asarray(sample, dtype=float)
    return Query(sample, Gaussian(sample, np.asarray(cov, dtype=float)))


class TestPointEstimates:
    def test_constant_model_gives_exact_one(self):
        model = leaf_model(label=0, n_features=2)
        est = mc_robustness(model, gaussian_query([0.0, 0.0], np.eye(2)),
                            10_000, seed=1)
        assert est.robustness_hat == 1.0
        assert est.n_samples == 10_000
        assert est.std_error == pytest.approx(1.0 / 10_000, abs=0.0)

    def test_stump_estimate_near_closed_form(self):
        model = stump_model(threshold=0.0)
        est = mc_robustness(model, gaussian_query([-1.0], [[1.0]]),
                            200_000, seed=2)
        exact = univariate_normal_cdf(1.0)
        assert abs(est.robustness_hat - exact) < 4.0 * est.std_error

    def test_copula_uncertainty_is_supported(self):
        model = stump_model(threshold=1.0, n_features=1)
        marginals = (MarginalDistribution("exponential", {"rate": 1.0}),)
        q = Query(np.array([0.5]), NortaModel(marginals, np.eye(1)))
        est = mc_robustness(model, q, 200_000, seed=3)
        exact = 1.0 - np.exp(-1.0)
        assert abs(est.robustness_hat - exact) < 4.0 * est.std_error


class TestErrorReporting:
    def test_standard_error_formula(self):
        model = stump_model(threshold=0.0)
        est = mc_robustness(model, gaussian_query([0.0], [[1.0]]),
                            50_000, seed=4)
        p = est.robustness_hat
        expected_se = np.sqrt(p * (1.0 - p) / 50_000)
        assert est.std_error == pytest.approx(expected_se, rel=1e-12)

    def test_degenerate_estimate_keeps_positive_error(self):
        model = leaf_model(label=1, n_features=1)
        est = mc_robustness(model, gaussian_query([0.0], [[1.0]]),
                            1000, seed=5)
        assert est.robustness_hat == 1.0
        assert est.std_error > 0.0

    def test_sample_count_validation(self):
        model = stump_model()
        with pytest.raises(ValueError):
            mc_robustness(model, gaussian_query([0.0], [[1.0]]), 0)


class TestDeterminism:
    def test_seeded_runs_are_identical(self):
        model = stump_model(threshold=0.3)
        q = gaussian_query([0.1], [[0.5]])
        a = mc_robustness(model, q, 100_000, seed=17)
        b = mc_robustness(model, q, 100_000, seed=17)
        assert a.robustness_hat == b.robustness_hat
        assert a.std_error == b.std_error
        c = mc_robustness(model, q, 100_000, seed=18)
        assert a.robustness_hat != c.robustness_hat

    def test_result_records_inputs(self):
        model = stump_model()
        est = mc_robustness(model, gaussian_query([0.0], [[1.0]]),
                            2048, seed=9)
        assert est.seed == 9
        assert est.n_samples == 2048


class TestCalibration:
    def test_interval_coverage_against_closed_form(self):
        # 100 randomized stump problems; the 3-sigma interval must cover
        # the exact value for at least 93 of them
        rng = np.random.default_rng(321)
        model = stump_model(threshold=0.0)
        covered = 0
        for trial in range(100):
            mu = float(rng.normal(scale=0.8))
            sd = float(np.exp(rng.normal(scale=0.3)))
            sample = np.array([mu])
            q = Query(sample, Gaussian(sample, np.array([[sd * sd]])))
            exact = compute_robustness(model, q).robustness
            est = mc_robustness(model, q, 10_000, seed=1000 + trial)
            if abs(est.robustness_hat - exact) <= 3.0 * est.std_error:
                covered += 1
        assert covered >= 93
