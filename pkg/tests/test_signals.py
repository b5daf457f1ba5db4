import numpy as np
import pytest
from hypothesis import given, strategies as st

from bpfrls import rng
from bpfrls.signals import (amplitude_schedule, gaussian_noise, ma_filter, noise_streams, prbs,
                            prbs_amplitude_modulated)


class TestPrbs:
    def test_codomain(self):
        assert set(np.unique(prbs(8, 0))) <= {-1.0, 1.0}

    def test_mean_near_zero(self):
        assert abs(prbs(10_000, 3).mean()) <= 0.05

    def test_deterministic(self):
        np.testing.assert_array_equal(prbs(500, 11), prbs(500, 11))

    def test_seeds_differ(self):
        assert not np.array_equal(prbs(500, 1), prbs(500, 2))

    def test_custom_levels(self):
        assert set(np.unique(prbs(100, 0, 0.0, 1.0))) == {0.0, 1.0}

    def test_lfsr_recurrence(self):
        bits = (prbs(400, 5, 0, 1)).astype(int)
        np.testing.assert_array_equal(bits[31:], bits[3:-28] ^ bits[:-31])

    def test_autocorrelation_small(self):
        u = prbs(10_000, 7)
        u = u - u.mean()
        for lag in (1, 2, 5, 17, 100):
            rho = np.dot(u[:-lag], u[lag:]) / np.dot(u, u)
            assert abs(rho) <= 0.05

    def test_invalid(self):
        with pytest.raises(ValueError):
            prbs(0, 0)
        with pytest.raises(ValueError):
            prbs(5, 0, 1.0, -1.0)


class TestAmplitudeModulation:
    def test_unit_schedule_is_plain_prbs(self):
        np.testing.assert_array_equal(prbs_amplitude_modulated(300, 4, amplitudes=[1]), prbs(300, 4))

    def test_zero_schedule(self):
        assert not prbs_amplitude_modulated(50, 4, amplitudes=[0]).any()

    def test_two_segments(self):
        u = prbs_amplitude_modulated(10, 9, amplitudes=[1, 2])
        assert set(np.abs(u[:5])) == {1.0}
        assert set(np.abs(u[5:])) == {2.0}

    def test_remainder_goes_last(self):
        np.testing.assert_array_equal(amplitude_schedule(7, [1, 2, 3]), [1, 1, 2, 2, 3, 3, 3])


class TestMaFilter:
    def test_empty_k(self):
        v = np.arange(5.0)
        np.testing.assert_array_equal(ma_filter(v, []), v)

    def test_impulse(self):
        v = np.zeros(6)
        v[0] = 1
        np.testing.assert_allclose(ma_filter(v, [-0.14, 0.20]), [1, -0.14, 0.20, 0, 0, 0])

    def test_step(self):
        np.testing.assert_array_equal(ma_filter(np.ones(5), [1]), [1, 2, 2, 2, 2])

    @given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 4))
    def test_linearity(self, seed, alpha, beta, n_k):
        r = np.random.default_rng(seed)
        v1, v2, k = r.normal(size=40), r.normal(size=40), r.normal(size=n_k)
        lhs = ma_filter(alpha * v1 + beta * v2, k)
        rhs = alpha * ma_filter(v1, k) + beta * ma_filter(v2, k)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(lhs).max()))


class TestNoise:
    def test_variance_scaling(self):
        base = gaussian_noise(100_000, 0.25, 5, rng.MEAS_NOISE)
        scaled = gaussian_noise(100_000, 0.25 * 9, 5, rng.MEAS_NOISE)
        assert np.var(scaled) == pytest.approx(9 * 0.25, rel=0.05)
        np.testing.assert_allclose(scaled, 3 * base)

    def test_streams_reproducible(self):
        a = noise_streams(200, 0.5, [0.1, 0.2], 8)
        b = noise_streams(200, 0.5, [0.1, 0.2], 8)
        np.testing.assert_array_equal(a.v, b.v)
        np.testing.assert_array_equal(a.w, b.w)
        assert a.generator_id == rng.GENERATOR_ID

    def test_common_random_numbers(self):
        lo = noise_streams(100, 0.45**2, [0.01], 3)
        hi = noise_streams(100, 1.0, [0.01], 3)
        np.testing.assert_allclose(hi.v, lo.v / 0.45)

    def test_streams_independent(self):
        s = noise_streams(1000, 1.0, [1.0], 2)
        assert abs(np.corrcoef(s.v, s.w[:, 0])[0, 1]) < 0.1

    def test_negative_variance(self):
        with pytest.raises(ValueError):
            noise_streams(10, -1.0, [0.1], 0)

    def test_generator_blocks_differ(self):
        a = rng.generator(1, rng.PF_NOISE, block=0).random(4)
        b = rng.generator(1, rng.PF_NOISE, block=1).random(4)
        assert not np.array_equal(a, b)
