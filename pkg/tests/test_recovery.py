import numpy as np
import pytest

from blocksketch.common.errors import ConfigError, LeastSquaresError
from blocksketch.recovery import (
    MeasurementMatrix,
    RecoveryConfig,
    block_hard_threshold,
    cgls,
    cosamp_block,
    default_k_grid,
    gaussian_matrix,
    mre_curve,
    relative_error,
    support_oracle,
)
from blocksketch.signal import ComplexBlockSignal, make_random_block_signal
from blocksketch.stable import RngStream


class TestHardThreshold:
    def test_keeps_largest_blocks(self):
        v = ComplexBlockSignal([3, 0, 1j, 0, 0, 2], 2)
        out = block_hard_threshold(v, 2)
        np.testing.assert_array_equal(out.entries, [3, 0, 0, 0, 0, 2])

    def test_zero_blocks(self):
        v = ComplexBlockSignal([3, 0, 1j, 0], 2)
        assert block_hard_threshold(v, 0).is_zero()

    def test_all_blocks_is_identity(self):
        v = ComplexBlockSignal([3, 0, 1j, 0, 0, 2], 2)
        assert block_hard_threshold(v, 3) == v

    def test_ties_prefer_lower_index(self):
        v = ComplexBlockSignal([1, 1j, -1], 1)
        np.testing.assert_array_equal(block_hard_threshold(v, 1).entries, [1, 0, 0])

    def test_too_many(self):
        with pytest.raises(ConfigError):
            block_hard_threshold(ComplexBlockSignal([1, 2], 1), 3)


class TestRelativeError:
    def test_value(self):
        x = ComplexBlockSignal([3, 4j], 1)
        assert relative_error(ComplexBlockSignal([3, 0], 1), x) == pytest.approx(0.8)

    def test_zero_reference(self):
        with pytest.raises(ConfigError):
            relative_error(ComplexBlockSignal([1], 1), ComplexBlockSignal([0], 1))


class TestCgls:
    def test_matches_lstsq_for_complex_data(self):
        gen = np.random.default_rng(3)
        A = gen.standard_normal((20, 6))
        y = gen.standard_normal(20) + 1j * gen.standard_normal(20)
        z, iterations = cgls(A, y, 100, 1e-12)
        np.testing.assert_allclose(z, np.linalg.lstsq(A, y, rcond=None)[0], atol=1e-9)
        assert 1 <= iterations <= 100

    def test_zero_data(self):
        z, iterations = cgls(np.eye(3), np.zeros(3), 10, 1e-10)
        assert iterations == 0
        assert not np.any(z)

    def test_breakdown(self):
        with pytest.raises(LeastSquaresError):
            cgls(np.array([[np.inf, 1.0]]), np.array([1.0]), 10, 1e-10)


class TestRecoveryConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            RecoveryConfig(0, 1)
        with pytest.raises(ConfigError):
            RecoveryConfig(2, 0)


class TestCosamp:
    def test_identity_measurements(self):
        truth = make_random_block_signal(24, 3, 2, RngStream(1))
        A = MeasurementMatrix(np.eye(24))
        res = cosamp_block(A.apply(truth.entries), A, RecoveryConfig(3, 2), truth=truth)
        assert res.relative_error <= 1e-6
        assert len(res.support) == 2

    def test_sparsity_larger_than_blocks(self):
        A = MeasurementMatrix(np.eye(4))
        with pytest.raises(ConfigError):
            cosamp_block(np.ones(4), A, RecoveryConfig(2, 3))

    def test_measurement_count_checked(self):
        A = MeasurementMatrix(np.eye(4))
        with pytest.raises(ConfigError):
            cosamp_block(np.ones(3), A, RecoveryConfig(2, 1))

    def test_zero_measurements_give_zero_signal(self):
        A = gaussian_matrix(10, 20, RngStream(2))
        res = cosamp_block(np.zeros(10), A, RecoveryConfig(2, 2))
        assert res.x_hat.is_zero()
        assert res.iterations == 0

    def test_residual_never_increases(self):
        truth = make_random_block_signal(300, 4, 12, RngStream(3))
        A = gaussian_matrix(120, 300, RngStream(4))
        y = A.apply(truth.entries)
        for k_in in (5, 12, 40):
            res = cosamp_block(y, A, RecoveryConfig(4, k_in), truth=truth)
            assert res.relative_residual <= 1.0

    def test_almost_exact_at_true_sparsity(self):
        truth = make_random_block_signal(300, 4, 12, RngStream(5))
        A = gaussian_matrix(120, 300, RngStream(6))
        res = cosamp_block(A.apply(truth.entries), A, RecoveryConfig(4, 12), truth=truth)
        assert res.relative_error <= 1e-4

    def test_underestimated_sparsity_misses_blocks(self):
        truth = make_random_block_signal(300, 4, 12, RngStream(5))
        A = gaussian_matrix(120, 300, RngStream(6))
        y = A.apply(truth.entries)
        low = cosamp_block(y, A, RecoveryConfig(4, 7), truth=truth)
        exact = cosamp_block(y, A, RecoveryConfig(4, 12), truth=truth)
        assert low.relative_error > 0.1
        assert low.relative_error > exact.relative_error


class TestSupportOracle:
    def test_oracle_finds_true_support(self):
        truth = make_random_block_signal(6, 2, 1, RngStream(7))
        A = gaussian_matrix(4, 6, RngStream(8))
        found = support_oracle(A.apply(truth.entries), A, 2, 1)
        assert relative_error(found, truth) <= 1e-6

    def test_cosamp_matches_oracle_on_small_instances(self):
        matched = checked = 0
        for t in range(100):
            rng = RngStream(9, t)
            n, d = 4 + t % 5, 2
            k = 1 + t % 2
            truth = make_random_block_signal(n * d, d, k, rng.child(0))
            A = gaussian_matrix(4 * k * d + 4, n * d, rng.child(1))
            y = A.apply(truth.entries)
            oracle = support_oracle(y, A, d, k)
            if relative_error(oracle, truth) > 1e-6:
                continue
            checked += 1
            res = cosamp_block(y, A, RecoveryConfig(d, k), truth=truth)
            matched += abs(res.relative_error - relative_error(oracle, truth)) <= 1e-6
        assert checked >= 95
        assert matched == checked

    def test_smallest_instance(self):
        matched = 0
        for t in range(100):
            rng = RngStream(10, t)
            truth = make_random_block_signal(6, 2, 1, rng.child(0))
            A = gaussian_matrix(4, 6, rng.child(1))
            y = A.apply(truth.entries)
            oracle = support_oracle(y, A, 2, 1)
            res = cosamp_block(y, A, RecoveryConfig(2, 1), truth=truth)
            matched += relative_error(res.x_hat, oracle) <= 1e-6
        assert matched == 100

    def test_restart_escapes_a_wrong_first_support(self):
        rng = RngStream(10, 3)
        truth = make_random_block_signal(6, 2, 1, rng.child(0))
        A = gaussian_matrix(4, 6, rng.child(1))
        y = A.apply(truth.entries)
        plain = cosamp_block(y, A, RecoveryConfig(2, 1, restarts=0), truth=truth)
        res = cosamp_block(y, A, RecoveryConfig(2, 1), truth=truth)
        assert res.relative_error <= 1e-6
        assert plain.relative_error > 0.5
        assert res.relative_residual <= plain.relative_residual

    def test_restarts_validated(self):
        with pytest.raises(ConfigError):
            RecoveryConfig(2, 1, restarts=-1)


class TestMreCurve:
    def test_default_grid(self):
        assert default_k_grid(75) == list(range(1, 76))
        assert default_k_grid(75, coarse=True) == list(range(4, 75, 4))

    def test_curve_points(self):
        truth = make_random_block_signal(40, 2, 2, RngStream(11))
        points = mre_curve(truth, 30, [1, 2, 4], 4, RngStream(12), workers=2)
        assert [p.k_in for p in points] == [1, 2, 4]
        assert all(p.trials == 4 and len(p.errors) == 4 for p in points)
        assert points[1].mre <= 1e-6
        assert points[0].mre > 0.05

    def test_matched_trials_are_reproducible(self):
        truth = make_random_block_signal(40, 2, 2, RngStream(11))
        a = mre_curve(truth, 20, [2, 3], 3, RngStream(13), workers=1)
        b = mre_curve(truth, 20, [2, 3], 3, RngStream(13), workers=3)
        assert [p.errors for p in a] == [p.errors for p in b]

    def test_trials_positive(self):
        truth = make_random_block_signal(8, 2, 1, RngStream(0))
        with pytest.raises(ConfigError):
            mre_curve(truth, 4, [1], 0, RngStream(0))

    @pytest.mark.slow
    def test_error_vanishes_as_m_reaches_n(self):
        truth = make_random_block_signal(120, 4, 12, RngStream(14))
        (point,) = mre_curve(truth, 120, [12], 20, RngStream(15))
        assert point.mre <= 1e-6
