import math

import numpy as np
import pytest
from scipy import stats

from blocksketch.common.errors import ConfigError
from blocksketch.stable import (
    RngStream,
    StableLawParams,
    sample_isotropic_vector,
    sample_isotropic_vectors,
    sample_positive_stable,
    sample_projection_row,
    sample_projection_rows,
    sample_scalar_sas,
)

M = 100_000


class TestRngStream:
    def test_same_ids_same_sequence(self):
        a = RngStream(7, 3).generator.random(5)
        b = RngStream(7, 3).generator.random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_and_children_differ(self):
        base = RngStream(7, 3).generator.random(5)
        assert not np.array_equal(base, RngStream(7, 4).generator.random(5))
        assert not np.array_equal(base, RngStream(7, 3).child(0).generator.random(5))
        assert not np.array_equal(
            RngStream(7, 3).child(0).generator.random(5), RngStream(7, 3).child(1).generator.random(5)
        )

    def test_ids(self):
        assert RngStream(1, 2).child(3).child(4).ids() == {"seed": 1, "stream_id": 2, "path": [3, 4]}

    @pytest.mark.parametrize("seed,stream", [(-1, 0), (0, -1), (2 ** 64, 0)])
    def test_invalid_ids(self, seed, stream):
        with pytest.raises(ConfigError):
            RngStream(seed, stream)


class TestScalarSas:
    def test_gaussian_case_has_unit_variance(self):
        v = sample_scalar_sas(2.0, math.sqrt(2) / 2, RngStream(1), size=M)
        assert np.var(v) == pytest.approx(1.0, abs=0.03)

    def test_cauchy_case_median(self):
        v = sample_scalar_sas(1.0, 1.0, RngStream(2), size=M)
        assert np.median(np.abs(v)) == pytest.approx(1.0, abs=0.03)

    @pytest.mark.parametrize("alpha,gamma", [(0.05, 1.0), (0.5, 1.0), (1.5, 2.0), (1.9, 0.7)])
    def test_characteristic_function(self, alpha, gamma):
        v = sample_scalar_sas(alpha, gamma, RngStream(3), size=M)
        assert np.mean(np.cos(v)) == pytest.approx(math.exp(-gamma ** alpha), abs=0.02)

    def test_scalar_when_size_is_none(self):
        assert isinstance(sample_scalar_sas(0.7, 1.0, RngStream(4)), float)

    def test_draws_are_finite_for_tiny_alpha(self):
        v = sample_scalar_sas(0.01, 1.0, RngStream(5), size=10_000)
        assert np.all(np.isfinite(v))

    @pytest.mark.parametrize("alpha,gamma", [(0.0, 1.0), (2.5, 1.0), (1.0, 0.0), (1.0, -1.0)])
    def test_invalid_parameters(self, alpha, gamma):
        with pytest.raises(ConfigError):
            sample_scalar_sas(alpha, gamma, RngStream(0))


class TestPositiveStable:
    @pytest.mark.parametrize("a", [0.025, 0.25, 0.75])
    def test_laplace_transform(self, a):
        w = sample_positive_stable(a, RngStream(6), size=M)
        assert np.all(w > 0)
        assert np.mean(np.exp(-w)) == pytest.approx(math.exp(-1.0), abs=0.01)

    def test_index_one_is_point_mass(self):
        np.testing.assert_array_equal(sample_positive_stable(1.0, RngStream(0), size=3), 1.0)

    def test_index_out_of_range(self):
        with pytest.raises(ConfigError):
            sample_positive_stable(1.5, RngStream(0))


class TestIsotropicVectors:
    def test_params_validated(self):
        with pytest.raises(ConfigError):
            StableLawParams(0, 1.0)
        with pytest.raises(ConfigError):
            StableLawParams(2, 2.1)

    def test_gaussian_components_are_independent_standard_normals(self):
        v = sample_isotropic_vectors(StableLawParams(2, 2.0, math.sqrt(2) / 2), RngStream(7), M)
        assert np.corrcoef(v[:, 0], v[:, 1])[0, 1] == pytest.approx(0.0, abs=0.02)
        np.testing.assert_allclose(np.var(v, axis=0), 1.0, atol=0.03)

    @pytest.mark.parametrize("dim,alpha,gamma", [(2, 0.5, 1.0), (3, 1.0, 1.0), (4, 1.5, 0.8), (10, 0.05, 1.0)])
    def test_characteristic_function_on_directions(self, dim, alpha, gamma):
        v = sample_isotropic_vectors(StableLawParams(dim, alpha, gamma), RngStream(8), M)
        directions = np.random.default_rng(0).standard_normal((5, dim)) * 0.7
        for u in directions:
            expected = math.exp(-(gamma * np.linalg.norm(u)) ** alpha)
            assert np.mean(np.cos(v @ u)) == pytest.approx(expected, abs=0.02)

    def test_rotation_invariance(self):
        params = StableLawParams(2, 0.8, 1.0)
        a = sample_isotropic_vectors(params, RngStream(9, 0), 10_000) @ np.array([1.0, 0.0])
        b = sample_isotropic_vectors(params, RngStream(9, 1), 10_000) @ np.array([0.6, 0.8])
        # two-sample KS critical value at the 1% level
        assert stats.ks_2samp(a, b).statistic < 1.628 * math.sqrt(2 / 10_000)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
    def test_stable_under_addition(self, alpha):
        params = StableLawParams(3, alpha, 1.0)
        v1 = sample_isotropic_vectors(params, RngStream(13, 0), M)
        v2 = sample_isotropic_vectors(params, RngStream(13, 1), M)
        w = (v1 + v2) / 2 ** (1 / alpha)
        directions = np.random.default_rng(1).standard_normal((5, 3)) * 0.7
        for u in directions:
            expected = math.exp(-np.linalg.norm(u) ** alpha)
            assert np.mean(np.cos(w @ u)) == pytest.approx(expected, abs=0.02)

    def test_single_vector(self):
        assert sample_isotropic_vector(StableLawParams(3, 1.2), RngStream(0)).shape == (3,)


class TestProjectionRows:
    def test_shape(self):
        assert sample_projection_row(3, 2, 1.0, 1.0, RngStream(0)).shape == (6,)
        assert sample_projection_rows(3, 2, 1.0, 1.0, RngStream(0), 5).shape == (5, 6)

    def test_blocks_are_independent(self):
        rows = sample_projection_rows(3, 2, 2.0, 1.0, RngStream(10), M)
        assert np.corrcoef(rows[:, 1], rows[:, 2])[0, 1] == pytest.approx(0.0, abs=0.02)
        assert np.corrcoef(rows[:, 0], rows[:, 4])[0, 1] == pytest.approx(0.0, abs=0.02)

    def test_gaussian_entries(self):
        rows = sample_projection_rows(2, 2, 2.0, 0.5, RngStream(11), M)
        np.testing.assert_allclose(np.var(rows, axis=0), 2 * 0.5 ** 2, rtol=0.03)

    @pytest.mark.parametrize("alpha,gamma", [(1.0, 1.0), (2.0, math.sqrt(2) / 2), (0.5, 1.0)])
    def test_inner_product_law(self, alpha, gamma):
        x = np.array([0.3, -0.4, 0.0, 0.0, 1.0, 0.5])
        rows = sample_projection_rows(3, 2, alpha, gamma, RngStream(12), M)
        norm = sum(np.linalg.norm(b) ** alpha for b in x.reshape(3, 2)) ** (1 / alpha)
        for t in (0.25, 0.5, 1.0, 2.0):
            expected = math.exp(-(gamma * norm * t) ** alpha)
            assert np.mean(np.cos(t * (rows @ x))) == pytest.approx(expected, abs=0.02)
