"""Marginal families, rank-correlation mapping, and the Gaussian copula."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from boxprob import (
    Box,
    Gaussian,
    IntegratorConfig,
    MarginalDistribution,
    NortaModel,
    build_transformed_gaussian,
    mvn_rectangle_probability,
    sample_norta,
    spearman_to_pearson,
    transform_box_bounds,
)

# frozen references
CHI2_2_CDF_AT_2 = 0.6321205588285576784   # 1 - exp(-1)
PEARSON_AT_HALF = 0.5176380902050415247   # 2 sin(pi / 12)


def normal(mean=0.0, sd=1.0):
    return MarginalDistribution("normal", {"mean": mean, "sd": sd})


class TestMarginals:
    def test_normal_cdf_and_quantile(self):
        m = normal(2.0, 3.0)
        assert m.cdf(2.0) == 0.5
        assert m.quantile(0.5) == pytest.approx(2.0, abs=1e-12)

    def test_exponential_support_starts_at_loc(self):
        m = MarginalDistribution("exponential", {"rate": 2.0, "loc": 1.0})
        assert m.cdf(1.0) == 0.0
        assert m.cdf(0.0) == 0.0
        assert m.cdf(1.0 + math.log(2.0) / 2.0) == pytest.approx(0.5,
                                                                 abs=1e-12)

    def test_chi_square_frozen_value(self):
        m = MarginalDistribution("chi_square", {"df": 2.0})
        assert m.cdf(2.0) == pytest.approx(CHI2_2_CDF_AT_2, abs=1e-15)

    def test_uniform_is_linear_on_support(self):
        m = MarginalDistribution("uniform", {"low": -1.0, "high": 3.0})
        assert m.cdf(-1.0) == 0.0
        assert m.cdf(3.0) == 1.0
        assert m.cdf(0.0) == 0.25

    def test_lognormal_median(self):
        m = MarginalDistribution("lognormal", {"mu": 1.0, "sigma": 0.5})
        assert m.cdf(math.e) == pytest.approx(0.5, abs=1e-12)
        shifted = MarginalDistribution("lognormal",
                                       {"mu": 1.0, "sigma": 0.5, "loc": 4.0})
        assert shifted.cdf(math.e + 4.0) == pytest.approx(0.5, abs=1e-12)

    def test_quantile_inverts_cdf_across_families(self):
        members = [
            normal(-1.0, 2.0),
            MarginalDistribution("exponential", {"rate": 0.5}),
            MarginalDistribution("chi_square", {"df": 3.0, "loc": -1.0}),
            MarginalDistribution("uniform", {"low": 0.0, "high": 10.0}),
            MarginalDistribution("lognormal", {"mu": 0.0, "sigma": 1.0}),
        ]
        for m in members:
            for p in (0.01, 0.25, 0.5, 0.75, 0.99):
                assert m.cdf(m.quantile(p)) == pytest.approx(p, abs=1e-10)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            MarginalDistribution("normal", {"mean": 0.0, "sd": 0.0})
        with pytest.raises(ValueError):
            MarginalDistribution("exponential", {"rate": -1.0})
        with pytest.raises(ValueError):
            MarginalDistribution("uniform", {"low": 1.0, "high": 1.0})
        with pytest.raises(ValueError):
            MarginalDistribution("gamma", {"shape": 1.0})
        with pytest.raises(ValueError):
            MarginalDistribution("normal", {"sd": 1.0})

    def test_shifted_moves_location(self):
        m = MarginalDistribution("exponential", {"rate": 2.0})
        s = m.shifted(5.0)
        assert s.cdf(5.0) == 0.0
        assert s.cdf(5.0 + math.log(2.0) / 2.0) == pytest.approx(0.5,
                                                                 abs=1e-12)
        u = MarginalDistribution("uniform", {"low": 0.0, "high": 1.0})
        assert u.shifted(-2.0).cdf(-1.5) == 0.5


class TestRankCorrelationMapping:
    def test_frozen_value_at_one_half(self):
        assert spearman_to_pearson(0.5) == pytest.approx(PEARSON_AT_HALF,
                                                         abs=1e-16)

    def test_fixed_points_and_oddness(self):
        assert spearman_to_pearson(0.0) == 0.0
        assert spearman_to_pearson(1.0) == pytest.approx(1.0, abs=1e-12)
        assert spearman_to_pearson(-1.0) == pytest.approx(-1.0, abs=1e-12)
        for rho in np.linspace(-1.0, 1.0, 21):
            assert spearman_to_pearson(-rho) == -spearman_to_pearson(rho)

    def test_monotone_and_range_preserving(self):
        grid = np.linspace(-1.0, 1.0, 401)
        mapped = spearman_to_pearson(grid)
        assert np.all(np.diff(mapped) > 0)
        assert np.all(np.abs(mapped) <= 1.0)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            spearman_to_pearson(1.5)


class TestTransformedGaussian:
    def test_identity_spearman_gives_identity_gaussian(self):
        model = NortaModel((normal(), normal(), normal()), np.eye(3))
        g = build_transformed_gaussian(model)
        assert np.array_equal(g.cov, np.eye(3))
        assert np.array_equal(g.mean, np.zeros(3))

    def test_diagonal_is_exactly_one(self):
        spearman = np.array([[1.0, 0.5], [0.5, 1.0]])
        g = build_transformed_gaussian(NortaModel((normal(), normal()),
                                                  spearman))
        assert g.cov[0, 0] == 1.0
        assert g.cov[1, 1] == 1.0
        assert g.cov[0, 1] == pytest.approx(PEARSON_AT_HALF, abs=1e-16)

    def test_infeasible_rank_matrix_rejected(self):
        spearman = np.array([
            [1.0, 0.95, -0.95],
            [0.95, 1.0, 0.95],
            [-0.95, 0.95, 1.0],
        ])
        with pytest.raises(ValueError, match="positive definite"):
            NortaModel((normal(), normal(), normal()), spearman)


class TestBoundTransform:
    def test_normal_marginal_standardizes(self):
        model = NortaModel((normal(2.0, 3.0),), np.eye(1))
        box = Box(np.array([-1.0]), np.array([5.0]))
        lower, upper = transform_box_bounds(model, box)
        assert lower[0] == pytest.approx(-1.0, abs=1e-12)
        assert upper[0] == pytest.approx(1.0, abs=1e-12)

    def test_support_edges_map_to_infinities(self):
        model = NortaModel(
            (MarginalDistribution("exponential", {"rate": 1.0}),
             MarginalDistribution("uniform", {"low": 0.0, "high": 1.0})),
            np.eye(2))
        box = Box(np.array([-5.0, -2.0]), np.array([np.inf, 1.0]))
        lower, upper = transform_box_bounds(model, box)
        assert np.isneginf(lower).all()
        assert np.isposinf(upper).all()

    def test_nested_boxes_stay_nested(self, rng):
        model = NortaModel(
            (MarginalDistribution("chi_square", {"df": 4.0}),
             MarginalDistribution("lognormal", {"mu": 0.0, "sigma": 0.7})),
            np.eye(2))
        inner = Box(np.array([1.0, 0.5]), np.array([3.0, 2.0]))
        outer = Box(np.array([0.5, 0.25]), np.array([4.0, 3.0]))
        in_lo, in_up = transform_box_bounds(model, inner)
        out_lo, out_up = transform_box_bounds(model, outer)
        assert np.all(out_lo <= in_lo)
        assert np.all(out_up >= in_up)


class TestNortaModelValidation:
    def test_shape_and_diagonal_checks(self):
        with pytest.raises(ValueError):
            NortaModel((normal(),), np.eye(2))
        bad_diag = np.array([[0.9, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            NortaModel((normal(), normal()), bad_diag)
        asym = np.array([[1.0, 0.2], [0.3, 1.0]])
        with pytest.raises(ValueError):
            NortaModel((normal(), normal()), asym)

    def test_shifted_moves_every_marginal(self):
        model = NortaModel(
            (normal(0.0, 1.0),
             MarginalDistribution("exponential", {"rate": 1.0})),
            np.eye(2))
        moved = model.shifted(np.array([3.0, -1.0]))
        assert moved.marginals[0].cdf(3.0) == 0.5
        assert moved.marginals[1].cdf(-1.0) == 0.0


class TestSampling:
    def test_normal_marginals_reduce_to_gaussian(self):
        corr = np.array([[1.0, 0.5], [0.5, 1.0]])
        model = NortaModel((normal(1.0, 2.0), normal(-1.0, 0.5)), corr)
        draws = sample_norta(model, 200_000, seed=7)
        assert draws.shape == (200_000, 2)
        assert draws[:, 0].mean() == pytest.approx(1.0, abs=0.02)
        assert draws[:, 0].std() == pytest.approx(2.0, abs=0.02)
        assert draws[:, 1].mean() == pytest.approx(-1.0, abs=0.01)

    def test_marginal_supports_respected(self):
        model = NortaModel(
            (MarginalDistribution("exponential", {"rate": 1.0, "loc": 2.0}),
             MarginalDistribution("uniform", {"low": -1.0, "high": 1.0})),
            np.eye(2))
        draws = sample_norta(model, 10_000, seed=3)
        assert (draws[:, 0] >= 2.0).all()
        assert ((draws[:, 1] >= -1.0) & (draws[:, 1] <= 1.0)).all()

    def test_recovers_requested_spearman(self):
        spearman = np.array([[1.0, 0.4], [0.4, 1.0]])
        model = NortaModel(
            (MarginalDistribution("lognormal", {"mu": 0.0, "sigma": 1.0}),
             MarginalDistribution("exponential", {"rate": 0.5})),
            spearman)
        draws = sample_norta(model, 200_000, seed=11)
        rho_hat = stats.spearmanr(draws[:, 0], draws[:, 1]).statistic
        assert rho_hat == pytest.approx(0.4, abs=0.01)

    def test_deterministic_under_seed(self):
        model = NortaModel((normal(), normal()),
                           np.array([[1.0, 0.3], [0.3, 1.0]]))
        a = sample_norta(model, 100, seed=5)
        b = sample_norta(model, 100, seed=5)
        assert np.array_equal(a, b)
        c = sample_norta(model, 100, seed=6)
        assert not np.array_equal(a, c)


class TestBoxProbabilityEquivalence:
    def test_normal_marginals_match_direct_gaussian(self, rng):
        # with normal marginals the copula construction must reproduce the
        # plain correlated Gaussian rectangle probability
        corr = np.array([[1.0, 0.5176380902050415],
                         [0.5176380902050415, 1.0]])
        spearman = np.array([[1.0, 0.5], [0.5, 1.0]])
        means = np.array([1.0, -2.0])
        sds = np.array([2.0, 0.5])
        model = NortaModel((normal(1.0, 2.0), normal(-2.0, 0.5)), spearman)
        direct = Gaussian(means, corr * np.outer(sds, sds))
        for _ in range(5):
            lo = means + sds * rng.normal(size=2) - 0.5
            up = lo + np.abs(rng.normal(size=2)) * sds + 0.1
            box = Box(lo, up)
            z_lo, z_up = transform_box_bounds(model, box)
            via_copula = mvn_rectangle_probability(
                build_transformed_gaussian(model), z_lo, z_up,
                IntegratorConfig(seed=1))
            reference = mvn_rectangle_probability(
                direct, lo, up, IntegratorConfig(seed=2))
            assert via_copula.value == pytest.approx(reference.value,
                                                     abs=1e-5)
