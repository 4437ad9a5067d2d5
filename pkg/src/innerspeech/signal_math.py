"""Shared numerical kernels: DFT, periodogram PSD, multilevel DWT, analytic envelope.

Everything here is a pure, deterministic function of its inputs, so the
kernels are safe to call from parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Orthonormal scaling (lowpass) filters. The wavelet filter is derived by
# the quadrature-mirror rule g[n] = (-1)^n h[L-1-n].
_SQRT2 = np.sqrt(2.0)
WAVELET_FILTERS: dict[str, np.ndarray] = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    "db2": np.array(
        [
            (1.0 + np.sqrt(3.0)) / (4.0 * _SQRT2),
            (3.0 + np.sqrt(3.0)) / (4.0 * _SQRT2),
            (3.0 - np.sqrt(3.0)) / (4.0 * _SQRT2),
            (1.0 - np.sqrt(3.0)) / (4.0 * _SQRT2),
        ]
    ),
    "db4": np.array(
        [
            0.230377813308855230,
            0.714846570552541500,
            0.630880767929590400,
            -0.027983769416983850,
            -0.187034811718881140,
            0.030841381835986965,
            0.032883011666982945,
            -0.010597401784997278,
        ]
    ),
}

PSD_WINDOWS = ("rect", "hann")


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectral density.

    ``power`` is scaled so that integrating it over frequency (sum times
    ``resolution``) returns mean signal power; a unit-amplitude sinusoid
    integrates to ~0.5 over its spectral peak.
    """

    freqs: np.ndarray
    power: np.ndarray
    resolution: float

    def band_power(self, lo: float, hi: float) -> float:
        """Integrated power over ``lo <= f < hi``."""
        sel = (self.freqs >= lo) & (self.freqs < hi)
        return float(np.sum(self.power[sel]) * self.resolution)

    @property
    def total_power(self) -> float:
        return float(np.sum(self.power) * self.resolution)


@dataclass(frozen=True)
class WaveletDecomposition:
    """Multilevel DWT result: subbands ordered [d1, ..., dL, aL].

    Detail level 1 covers the top half-band; with periodization the
    coefficient count equals the input length and energy is conserved.
    """

    wavelet_name: str
    levels: int
    subbands: tuple[np.ndarray, ...]

    @property
    def coefficient_count(self) -> int:
        return int(sum(len(b) for b in self.subbands))

    @property
    def energy(self) -> float:
        return float(sum(np.sum(b * b) for b in self.subbands))


def dft(x: np.ndarray) -> np.ndarray:
    """Exact-definition DFT of an arbitrary-length vector (complex output)."""
    x = np.asarray(x)
    if x.size < 1:
        raise ValidationError("dft requires a non-empty input")
    return np.fft.fft(np.asarray(x, dtype=np.complex128))


def idft(x: np.ndarray) -> np.ndarray:
    """Inverse DFT; ``idft(dft(x)) ~= x``."""
    x = np.asarray(x)
    if x.size < 1:
        raise ValidationError("idft requires a non-empty input")
    return np.fft.ifft(np.asarray(x, dtype=np.complex128))


def _window(name: str, n: int) -> np.ndarray:
    if name == "rect":
        return np.ones(n)
    if name == "hann":
        # Periodic Hann, the usual choice for spectral estimation.
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    raise ValidationError(f"unknown PSD window {name!r}; expected one of {PSD_WINDOWS}")


def psd(x: np.ndarray, sample_rate: float, window: str = "hann") -> Spectrum:
    """One-sided windowed periodogram.

    Parameters
    ----------
    x : real array, length >= 8
    sample_rate : sampling rate in Hz
    window : "rect" or "hann"
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 8:
        raise ValidationError("psd requires a 1-D signal with at least 8 samples")
    if sample_rate <= 0:
        raise ValidationError("sample_rate must be positive")
    n = x.size
    w = _window(window, n)
    spec = np.fft.rfft(x * w)
    scale = 1.0 / (sample_rate * np.sum(w * w))
    power = (spec.real**2 + spec.imag**2) * scale
    power[1:] *= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0  # Nyquist bin is not mirrored
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    return Spectrum(freqs=freqs, power=power, resolution=sample_rate / n)


def _filters(wavelet: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        h = WAVELET_FILTERS[wavelet]
    except KeyError:
        raise ValidationError(
            f"unknown wavelet {wavelet!r}; supported: {sorted(WAVELET_FILTERS)}"
        ) from None
    g = ((-1.0) ** np.arange(len(h))) * h[::-1]
    return h, g


def _analysis_step(x: np.ndarray, h: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.size
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(h.size)[None, :]) % n
    windows = x[idx]
    return windows @ h, windows @ g


def dwt(x: np.ndarray, wavelet: str = "db4", levels: int = 5) -> WaveletDecomposition:
    """Mallat cascade with periodization extension.

    The input length must be divisible by ``2**levels``; that is what makes
    the periodized cascade orthogonal (exact energy conservation, coefficient
    count equal to the input length).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("dwt requires a 1-D signal")
    if levels < 1:
        raise ValidationError("levels must be >= 1")
    if x.size < 2**levels:
        raise ValidationError(
            f"signal of length {x.size} too short for a {levels}-level cascade"
        )
    if x.size % (2**levels) != 0:
        raise ValidationError(
            f"periodized cascade needs length divisible by 2^{levels}, got {x.size}"
        )
    h, g = _filters(wavelet)
    details: list[np.ndarray] = []
    approx = x
    for _ in range(levels):
        approx, detail = _analysis_step(approx, h, g)
        details.append(detail)
    return WaveletDecomposition(
        wavelet_name=wavelet, levels=levels, subbands=tuple(details) + (approx,)
    )


def idwt(dec: WaveletDecomposition) -> np.ndarray:
    """Inverse of :func:`dwt` (periodized synthesis cascade)."""
    h, g = _filters(dec.wavelet_name)
    approx = np.asarray(dec.subbands[-1], dtype=np.float64)
    for detail in reversed(dec.subbands[:-1]):
        n = 2 * approx.size
        idx = (2 * np.arange(approx.size)[:, None] + np.arange(h.size)[None, :]) % n
        contrib = approx[:, None] * h[None, :] + np.asarray(detail)[:, None] * g[None, :]
        out = np.zeros(n)
        np.add.at(out, idx.ravel(), contrib.ravel())
        approx = out
    return approx


def hilbert_envelope(x: np.ndarray) -> np.ndarray:
    """Magnitude of the analytic signal (one-sided spectrum construction).

    Positive-frequency bins are doubled, negative bins zeroed, DC and (for
    even lengths) the Nyquist bin kept as-is.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 8:
        raise ValidationError("hilbert_envelope requires >= 8 samples")
    n = x.size
    spec = np.fft.fft(x)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1 : n // 2] = 2.0
    else:
        gain[1 : (n + 1) // 2] = 2.0
    analytic = np.fft.ifft(spec * gain)
    return np.abs(analytic)
