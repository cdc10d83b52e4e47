"""Random-design linear model: designs, data generation and likelihoods."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from fracbayes.model import (
    LOG_SQRT_2PI,
    Dataset,
    DesignSpec,
    ModelError,
    ParameterPoint,
    check_alpha,
    fractional_log_likelihood,
    generate_dataset,
    generate_design,
    log_likelihood,
    residual_sum_squares,
    sparse_truth,
)
from fracbayes.rng import derive_seed, make_rng, replicate_seed


class TestRng:
    """Counter-based seeding."""

    def test_same_seed_same_stream(self):
        np.testing.assert_array_equal(make_rng(5, 1).random(4), make_rng(5, 1).random(4))

    def test_streams_differ(self):
        assert not np.allclose(make_rng(5, 1).random(4), make_rng(5, 2).random(4))

    def test_replicate_seed_is_xor(self):
        assert replicate_seed(12, 5) == 12 ^ 5

    def test_derive_seed_is_stable(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)


class TestDesignSpec:
    """Row laws and their constants."""

    def test_unit_sphere_rows_have_unit_norm(self):
        x = generate_design(DesignSpec.unit_sphere(10), 200, seed=1)
        np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)

    def test_gaussian_second_moment(self):
        d = 50
        x = generate_design(DesignSpec.gaussian_iso(d), 20_000, seed=2)
        sq = (x**2).sum(axis=1)
        se = sq.std(ddof=1) / math.sqrt(sq.size)
        assert abs(sq.mean() - d) < 3 * se

    def test_design_deterministic(self):
        spec = DesignSpec.gaussian_iso(4)
        np.testing.assert_array_equal(generate_design(spec, 7, 3), generate_design(spec, 7, 3))

    @pytest.mark.parametrize("vartheta", [0.0, -1.0])
    def test_nonpositive_vartheta_rejected(self, vartheta):
        with pytest.raises(ModelError):
            DesignSpec.gaussian_iso(3, vartheta)

    def test_c_x(self):
        assert DesignSpec.gaussian_iso(16, 0.5).c_x == pytest.approx(2.0)
        assert DesignSpec.unit_sphere(16).c_x == 1.0

    @pytest.mark.parametrize("spec", [DesignSpec.gaussian_iso(6, 1.5), DesignSpec.unit_sphere(6)])
    def test_second_moment_bounded_by_c_x(self, spec):
        x = spec.sample_rows(100_000, make_rng(9))
        sq = (x**2).sum(axis=1)
        se = sq.std(ddof=1) / math.sqrt(sq.size)
        assert sq.mean() <= spec.c_x**2 + 3 * se

    @pytest.mark.parametrize("spec", [DesignSpec.gaussian_iso(5, 2.0), DesignSpec.unit_sphere(5)])
    def test_gram_matches_sample(self, spec):
        x = spec.sample_rows(200_000, make_rng(4))
        np.testing.assert_allclose(x.T @ x / x.shape[0], spec.gram(), atol=0.03 * spec.gram()[0, 0] * 5)

    @pytest.mark.parametrize("spec", [DesignSpec.gaussian_iso(4, 0.7), DesignSpec.unit_sphere(4)])
    def test_projection_law(self, spec):
        delta = np.array([0.3, -1.0, 0.0, 2.0])
        proj = spec.sample_projections(delta, 200_000, make_rng(3))[0]
        sq = proj**2
        se = sq.std(ddof=1) / math.sqrt(sq.size)
        assert abs(sq.mean() - spec.projection_second_moment(delta)) < 3 * se

    def test_round_trip_dict(self):
        spec = DesignSpec.gaussian_iso(3, 0.2)
        assert DesignSpec.from_dict(spec.to_dict()) == spec


class TestGenerateDataset:
    """``y = X theta0 + sigma0 eps``."""

    def test_noiseless_limit(self):
        theta0 = np.array([1.0, -2.0, 0.5])
        data = generate_dataset(DesignSpec.gaussian_iso(3), 40, theta0, 1e-12, seed=0)
        np.testing.assert_allclose(data.y, data.x @ theta0, atol=1e-10)

    def test_zero_truth_response_variance(self):
        data = generate_dataset(DesignSpec.gaussian_iso(5), 20_000, np.zeros(5), 2.0, seed=1)
        assert data.y.var() == pytest.approx(4.0, rel=0.05)

    def test_reproducible(self):
        a = generate_dataset(DesignSpec.gaussian_iso(4), 30, sparse_truth(4, 2), 1.0, seed=8)
        b = generate_dataset(DesignSpec.gaussian_iso(4), 30, sparse_truth(4, 2), 1.0, seed=8)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)

    def test_dimension_mismatch(self):
        with pytest.raises(ModelError):
            generate_dataset(DesignSpec.gaussian_iso(4), 10, np.zeros(3), 1.0, seed=0)

    def test_noise_is_normal(self):
        theta0 = sparse_truth(3, 1)
        data = generate_dataset(DesignSpec.gaussian_iso(3), 5000, theta0, 0.5, seed=11)
        resid = (data.y - data.x @ theta0) / 0.5
        assert stats.kstest(resid, "norm").pvalue > 0.001

    def test_csv_round_trip(self, tmp_path):
        data = generate_dataset(DesignSpec.unit_sphere(3), 6, sparse_truth(3, 2), 0.3, seed=4)
        back = Dataset.from_csv(data.to_csv(tmp_path / "data.csv"))
        np.testing.assert_array_equal(back.x, data.x)
        np.testing.assert_array_equal(back.y, data.y)
        np.testing.assert_array_equal(back.truth.theta, data.truth.theta)
        assert back.design == data.design

    def test_sparse_truth(self):
        theta = sparse_truth(6, 4)
        np.testing.assert_allclose(theta, [0.5, -0.5, 0.5, -0.5, 0, 0])
        assert np.count_nonzero(sparse_truth(6, 0)) == 0


def _one_point_data(x, y):
    return Dataset(np.array([[x]]), np.array([y]), DesignSpec.gaussian_iso(1), 0)


class TestLikelihood:
    """Gaussian and tempered log-likelihoods."""

    def test_zero_residual_value(self):
        data = _one_point_data(1.0, 2.0)
        assert log_likelihood(data, ParameterPoint([2.0], 1.0)) == pytest.approx(-0.9189385332046727, abs=1e-12)
        assert LOG_SQRT_2PI == pytest.approx(0.9189385332046727, abs=1e-15)

    def test_matches_scipy(self, rng):
        data = generate_dataset(DesignSpec.gaussian_iso(3), 25, [0.2, 0.0, -1.0], 0.7, seed=2)
        point = ParameterPoint(rng.standard_normal(3), 1.3)
        expected = stats.norm(data.x @ point.theta, point.sigma).logpdf(data.y).sum()
        assert log_likelihood(data, point) == pytest.approx(expected, abs=1e-10)

    def test_decreases_with_residual(self):
        data = _one_point_data(1.0, 0.0)
        values = [log_likelihood(data, ParameterPoint([t], 1.0)) for t in (0.0, 0.5, 1.0, 2.0)]
        assert np.all(np.diff(values) < 0)

    @pytest.mark.parametrize("alpha", [1.0, 0.5, 0.3])
    def test_fractional_is_scaled(self, alpha):
        data = _one_point_data(0.4, -0.3)
        point = ParameterPoint([0.1], 0.8)
        assert fractional_log_likelihood(data, point, alpha) == pytest.approx(alpha * log_likelihood(data, point))

    @pytest.mark.parametrize("alpha", [0.3, 0.7])
    def test_tempered_normalizer(self, alpha):
        """``int exp(alpha log N(y; 0, s^2)) dy = (2 pi s^2)^((1-alpha)/2) / sqrt(alpha)``."""
        sigma = 1.7
        point = ParameterPoint([0.0], sigma)

        def f(y):
            return math.exp(fractional_log_likelihood(_one_point_data(1.0, y), point, alpha))

        value, _ = integrate.quad(f, -np.inf, np.inf, epsabs=1e-13)
        expected = (2 * math.pi * sigma**2) ** ((1 - alpha) / 2) / math.sqrt(alpha)
        assert value == pytest.approx(expected, rel=1e-8)

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5, math.nan])
    def test_alpha_range(self, alpha):
        with pytest.raises(ModelError):
            check_alpha(alpha)

    def test_alpha_one_can_be_excluded(self):
        with pytest.raises(ModelError):
            check_alpha(1.0, allow_one=False)

    def test_rss(self):
        data = Dataset(np.eye(2), np.array([1.0, 2.0]), DesignSpec.gaussian_iso(2), 0)
        assert residual_sum_squares(data, [0.0, 0.0]) == 5.0

    @given(
        st.floats(0.01, 1.0),
        st.floats(0.01, 1.0),
        st.floats(0.1, 5.0),
        st.floats(-3, 3),
    )
    def test_alpha_homogeneity(self, a1, a2, sigma, t):
        data = _one_point_data(0.7, 1.1)
        point = ParameterPoint([t], sigma)
        lhs = fractional_log_likelihood(data, point, a1) * a2
        rhs = fractional_log_likelihood(data, point, a2) * a1
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_parameter_point_validation(self):
        with pytest.raises(ModelError):
            ParameterPoint([0.0], 0.0)
        with pytest.raises(ModelError):
            ParameterPoint([np.inf], 1.0)
        assert ParameterPoint([0.0, 2.0], 3.0).sparsity == 1
