import numpy as np
import pytest

from innerspeech.errors import ValidationError
from innerspeech.signal_math import (
    WAVELET_FILTERS,
    dft,
    dwt,
    hilbert_envelope,
    idft,
    idwt,
    psd,
)


def dft_direct(x):
    """O(N^2) direct-summation DFT, the independent oracle."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


class TestDft:
    def test_unit_impulse(self):
        assert np.allclose(dft([1, 0, 0, 0]), np.ones(4))

    def test_single_bin_exponential(self):
        n, k = 16, 3
        x = np.exp(2j * np.pi * k * np.arange(n) / n)
        spec = dft(x)
        assert abs(spec[k]) == pytest.approx(n, rel=1e-12)
        others = np.delete(np.abs(spec), k)
        assert others.max() < 1e-10

    def test_round_trip_and_parseval_length_100(self):
        x = np.random.default_rng(42).standard_normal(100)
        spec = dft(x)
        assert np.max(np.abs(idft(spec) - x)) < 1e-10
        assert np.sum(np.abs(x) ** 2) == pytest.approx(np.sum(np.abs(spec) ** 2) / 100, rel=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 7, 64, 100, 255])
    def test_matches_direct_summation_oracle(self, n):
        gen = np.random.default_rng(n)
        x = gen.standard_normal(n) + 1j * gen.standard_normal(n)
        assert np.max(np.abs(dft(x) - dft_direct(x))) < 1e-8 * max(1.0, np.abs(x).sum())

    def test_linearity(self):
        gen = np.random.default_rng(3)
        for _ in range(5):
            x = gen.standard_normal(33)
            y = gen.standard_normal(33)
            a, b = gen.standard_normal(2)
            lhs = dft(a * x + b * y)
            rhs = a * dft(x) + b * dft(y)
            assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.abs(rhs).max())

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            dft(np.array([]))


class TestPsd:
    def test_sinusoid_peak_location(self):
        fs, n = 256.0, 640
        t = np.arange(n) / fs
        spec = psd(np.sin(2 * np.pi * 10.0 * t), fs)
        peak = spec.freqs[np.argmax(spec.power)]
        assert abs(peak - 10.0) <= spec.resolution

    def test_unit_sinusoid_band_power_half(self):
        fs, n = 256.0, 640
        t = np.arange(n) / fs
        for window in ("rect", "hann"):
            spec = psd(np.sin(2 * np.pi * 10.0 * t), fs, window=window)
            assert spec.band_power(8.0, 12.0) == pytest.approx(0.5, rel=0.02)

    def test_zero_signal(self):
        spec = psd(np.zeros(64), 256.0)
        assert np.all(spec.power == 0.0)

    def test_white_noise_window_normalization(self):
        x = np.random.default_rng(11).standard_normal(4096)
        total_rect = psd(x, 100.0, window="rect").total_power
        total_hann = psd(x, 100.0, window="hann").total_power
        assert total_hann == pytest.approx(total_rect, rel=0.05)

    def test_axis_monotone_and_nonnegative(self):
        x = np.random.default_rng(5).standard_normal(101)
        spec = psd(x, 123.0)
        assert np.all(np.diff(spec.freqs) > 0)
        assert spec.freqs[0] == 0.0
        assert spec.freqs[-1] <= 123.0 / 2 + 1e-12
        assert np.all(spec.power >= 0.0)

    def test_too_short_rejected(self):
        with pytest.raises(ValidationError):
            psd(np.ones(7), 10.0)


class TestDwt:
    def test_haar_constant_signal(self):
        dec = dwt(np.ones(4), wavelet="haar", levels=1)
        assert np.allclose(dec.subbands[1], [np.sqrt(2), np.sqrt(2)])
        assert np.allclose(dec.subbands[0], [0.0, 0.0])

    def test_filters_are_orthonormal(self):
        for name, h in WAVELET_FILTERS.items():
            assert np.sum(h * h) == pytest.approx(1.0, abs=1e-12), name
            assert np.sum(h) == pytest.approx(np.sqrt(2.0), abs=1e-12), name

    @pytest.mark.parametrize("wavelet", ["haar", "db2", "db4"])
    @pytest.mark.parametrize("levels", [1, 3, 5])
    def test_energy_conservation(self, wavelet, levels):
        gen = np.random.default_rng(hash((wavelet, levels)) % 2**32)
        for _ in range(20):
            x = gen.standard_normal(640)
            dec = dwt(x, wavelet=wavelet, levels=levels)
            assert dec.coefficient_count == x.size
            assert dec.energy == pytest.approx(np.sum(x * x), rel=1e-9)

    def test_chirp_reconstruction_db4(self):
        n = 640
        t = np.arange(n) / 256.0
        x = np.sin(2 * np.pi * (5.0 + 20.0 * t) * t)
        dec = dwt(x, wavelet="db4", levels=5)
        assert np.max(np.abs(idwt(dec) - x)) < 1e-9

    @pytest.mark.parametrize("wavelet", ["haar", "db2", "db4"])
    def test_round_trip_random(self, wavelet):
        gen = np.random.default_rng(9)
        x = gen.standard_normal(256)
        rec = idwt(dwt(x, wavelet=wavelet, levels=4))
        assert np.max(np.abs(rec - x)) < 1e-9

    def test_too_short_rejected(self):
        with pytest.raises(ValidationError):
            dwt(np.ones(16), levels=5)

    def test_non_divisible_length_rejected(self):
        with pytest.raises(ValidationError):
            dwt(np.ones(100), wavelet="haar", levels=3)

    def test_unknown_wavelet_rejected(self):
        with pytest.raises(ValidationError):
            dwt(np.ones(64), wavelet="sym4", levels=2)


class TestHilbertEnvelope:
    def test_unit_sinusoid_envelope_near_one(self):
        fs, n = 256.0, 640
        t = np.arange(n) / fs
        env = hilbert_envelope(np.sin(2 * np.pi * 10.0 * t))
        inner = env[n // 10 : -n // 10]
        assert inner.min() > 0.95 and inner.max() < 1.05

    def test_zero_signal(self):
        assert np.all(hilbert_envelope(np.zeros(32)) == 0.0)

    def test_tracks_slow_amplitude_modulation(self):
        fs, n = 256.0, 2048
        t = np.arange(n) / fs
        a = 1.0 + 0.5 * np.sin(2 * np.pi * 0.5 * t)
        env = hilbert_envelope(a * np.sin(2 * np.pi * 30.0 * t))
        sl = slice(n // 10, -n // 10)
        rel_err = np.abs(env[sl] - a[sl]) / a[sl]
        assert rel_err.max() < 0.05

    def test_too_short_rejected(self):
        with pytest.raises(ValidationError):
            hilbert_envelope(np.ones(4))
