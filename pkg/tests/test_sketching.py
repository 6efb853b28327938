import math

import numpy as np
import pytest
from scipy import stats

from blocksketch.common.errors import ConfigError
from blocksketch.signal import ComplexBlockSignal, RealBlockSignal, make_harmonic_signal, to_real_block
from blocksketch.sketching import (
    NoiseFamily,
    NoiseModel,
    read_measurements_csv,
    sketch,
    sketch_pair,
    write_measurements_csv,
)
from blocksketch.stable import RngStream

UNIT_BLOCK = RealBlockSignal([0.6, 0.8, 0.0, 0.0], 2)


class TestNoiseModel:
    def test_omega0(self):
        assert NoiseModel(1.0).omega0 == pytest.approx(1.1774, abs=1e-4)
        assert NoiseModel(1.0, "cauchy").omega0 == pytest.approx(math.log(2))
        assert math.isinf(NoiseModel(1.0, NoiseFamily.NONE).omega0)

    def test_cf_is_one_half_at_omega0(self):
        for family in ("gaussian", "cauchy"):
            noise = NoiseModel(1.0, family)
            assert noise.cf(noise.omega0) == pytest.approx(0.5)

    def test_noiseless(self):
        assert NoiseModel(0.0).is_noiseless
        assert NoiseModel(3.0, "none").is_noiseless
        assert NoiseModel(3.0, "none").scaled_cf(10.0) == 1.0
        np.testing.assert_array_equal(NoiseModel(0.0).sample(np.random.default_rng(0), 4), 0.0)

    def test_negative_sigma(self):
        with pytest.raises(ConfigError):
            NoiseModel(-0.1)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            NoiseModel(0.1, "laplace")


class TestSketch:
    def test_gaussian_projection_variance(self):
        y = sketch(UNIT_BLOCK, 2.0, 1.0, 100_000, NoiseModel(), RngStream(1))
        assert np.var(y) == pytest.approx(2.0, abs=0.06)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_noiseless_law(self, alpha):
        y = sketch(UNIT_BLOCK, alpha, 1.0, 100_000, NoiseModel(), RngStream(2))
        assert np.mean(np.cos(y)) == pytest.approx(math.exp(-1.0), abs=0.02)

    def test_noisy_characteristic_function(self):
        m = 20_000
        noise = NoiseModel(0.1)
        y = sketch(UNIT_BLOCK, 0.5, 1.0, m, noise, RngStream(3))
        for t in (0.5, 1.0, 3.0):
            expected = math.exp(-abs(t) ** 0.5) * math.exp(-(0.1 * t) ** 2 / 2)
            assert np.mean(np.cos(t * y)) == pytest.approx(expected, abs=3 / math.sqrt(m))

    def test_deterministic(self):
        a = sketch(UNIT_BLOCK, 1.2, 1.0, 600, NoiseModel(0.1), RngStream(4, 2))
        b = sketch(UNIT_BLOCK, 1.2, 1.0, 600, NoiseModel(0.1), RngStream(4, 2))
        np.testing.assert_array_equal(a, b)

    def test_complex_input_uses_real_transform(self):
        x = make_harmonic_signal(3, 2, 10)
        a = sketch(x, 0.8, 1.0, 50, NoiseModel(), RngStream(5))
        b = sketch(to_real_block(x), 0.8, 1.0, 50, NoiseModel(), RngStream(5))
        np.testing.assert_array_equal(a, b)

    def test_zero_signal_rejected(self):
        with pytest.raises(ConfigError):
            sketch(RealBlockSignal([0.0, 0.0], 2), 1.0, 1.0, 10, NoiseModel(), RngStream(0))

    @pytest.mark.parametrize("m", [0, -3, 2.5])
    def test_bad_m(self, m):
        with pytest.raises(ConfigError):
            sketch(UNIT_BLOCK, 1.0, 1.0, m, NoiseModel(), RngStream(0))


class TestSketchPair:
    def test_batch_sizes(self):
        meas = sketch_pair(UNIT_BLOCK, 0.5, 1.0, 500, 500, NoiseModel(), RngStream(6))
        assert (meas.m1, meas.m_alpha) == (500, 500)
        assert meas.pi_alpha == 0.5
        assert meas.block_dim == 2

    def test_batches_are_independent(self):
        meas = sketch_pair(UNIT_BLOCK, 2.0, 1.0, 5000, 5000, NoiseModel(), RngStream(7))
        rho = stats.spearmanr(meas.batch_1, meas.batch_alpha).correlation
        assert rho == pytest.approx(0.0, abs=0.05)

    def test_linear_in_the_signal(self):
        x = to_real_block(make_harmonic_signal(4, 1, 8))
        a = sketch_pair(x, 0.7, 1.0, 200, 200, NoiseModel(), RngStream(8))
        b = sketch_pair(x.scaled(10.0), 0.7, 1.0, 200, 200, NoiseModel(), RngStream(8))
        np.testing.assert_allclose(b.batch_1, 10.0 * a.batch_1, rtol=1e-9)
        np.testing.assert_allclose(b.batch_alpha, 10.0 * a.batch_alpha, rtol=1e-9)

    def test_streams_recorded(self):
        meas = sketch_pair(UNIT_BLOCK, 0.5, 1.0, 5, 5, NoiseModel(), RngStream(9, 4))
        assert meas.streams["batch_alpha"] == {"seed": 9, "stream_id": 4, "path": [2]}


class TestMeasurementCsv:
    def test_round_trip(self):
        noise = NoiseModel(0.1, "cauchy")
        y = sketch(ComplexBlockSignal([1 + 1j, 0], 1), 1.5, 1.0, 20, noise, RngStream(10))
        values, meta = read_measurements_csv(write_measurements_csv(y, 1.5, 1.0, noise))
        np.testing.assert_array_equal(values, y)
        assert meta["alpha"] == 1.5
        assert meta["noise"] == noise

    def test_count_checked(self):
        with pytest.raises(ConfigError):
            read_measurements_csv("# alpha=1.0,gamma=1.0,sigma=0.0,family=gaussian,m=3\ny\n1.0\n")
