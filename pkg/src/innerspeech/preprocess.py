"""Motion-artifact screening and drift removal.

Contaminated (trial, channel) signals are found by robust statistical
screening; flagged signals are cleaned by decomposing them into band-limited
modes (variational mode decomposition) and discarding the lowest-frequency
mode, which carries the baseline drift.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalError, ValidationError
from .trialset import TrialSet, _frozen

_MAD_SCALE = 1.4826
_MAD_EPS = 1e-12


@dataclass(frozen=True)
class ArtifactMask:
    """Per (trial, channel) artifact flags with screening diagnostics."""

    flags: np.ndarray  # (n_trials, n_ch) bool
    z_mean: np.ndarray
    z_std: np.ndarray
    drift_ptp: np.ndarray
    drift_threshold: np.ndarray  # per channel
    z_thresh: float
    drift_factor: float

    def __post_init__(self):
        for name in ("flags", "z_mean", "z_std", "drift_ptp", "drift_threshold"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name))))

    @property
    def n_flagged(self) -> int:
        return int(self.flags.sum())

    def reasons(self, trial: int, ch: int) -> list[str]:
        out = []
        if abs(self.z_mean[trial, ch]) > self.z_thresh:
            out.append("z_mean")
        if abs(self.z_std[trial, ch]) > self.z_thresh:
            out.append("z_std")
        if self.drift_ptp[trial, ch] > self.drift_threshold[ch]:
            out.append("drift")
        return out

    def report_rows(self) -> list[tuple[int, int, str, float, float, float]]:
        """(trial, channel, reason, z_mean, z_std, drift_ptp) per flagged pair."""
        rows = []
        for t, c in zip(*np.nonzero(self.flags)):
            rows.append(
                (
                    int(t),
                    int(c),
                    "+".join(self.reasons(t, c)),
                    float(self.z_mean[t, c]),
                    float(self.z_std[t, c]),
                    float(self.drift_ptp[t, c]),
                )
            )
        return rows


@dataclass(frozen=True)
class VmdResult:
    """Modes sorted by ascending center frequency.

    center_freqs are in normalized units (cycles/sample, in [0, 0.5]);
    center_freqs_hz is populated when the caller supplied a sample rate.
    """

    modes: np.ndarray  # (K, N)
    center_freqs: np.ndarray  # (K,) normalized
    center_freqs_hz: np.ndarray | None
    iterations: int
    final_residual: float

    def __post_init__(self):
        object.__setattr__(self, "modes", _frozen(np.asarray(self.modes, dtype=np.float64)))
        object.__setattr__(self, "center_freqs", _frozen(np.asarray(self.center_freqs, dtype=np.float64)))
        if self.center_freqs_hz is not None:
            object.__setattr__(self, "center_freqs_hz", _frozen(np.asarray(self.center_freqs_hz)))

    @property
    def K(self) -> int:
        return self.modes.shape[0]

    def reconstruction(self) -> np.ndarray:
        return self.modes.sum(axis=0)


@dataclass(frozen=True)
class VmdParams:
    K: int = 6
    alpha: float = 2000.0
    tau: float = 0.0
    tol: float = 1e-7
    max_iter: int = 500


def _robust_z(values: np.ndarray) -> np.ndarray:
    """Median/MAD z-scores per column (values: trials x channels)."""
    med = np.median(values, axis=0, keepdims=True)
    mad = np.median(np.abs(values - med), axis=0, keepdims=True)
    return (values - med) / (_MAD_SCALE * mad + _MAD_EPS)


def _moving_average_ptp(data: np.ndarray, window: int) -> np.ndarray:
    """Peak-to-peak of the length-``window`` moving average, per (trial, ch)."""
    n = data.shape[-1]
    if window >= n:
        return np.zeros(data.shape[:-1])
    cs = np.cumsum(data, axis=-1, dtype=np.float64)
    cs = np.concatenate([np.zeros(data.shape[:-1] + (1,)), cs], axis=-1)
    ma = (cs[..., window:] - cs[..., :-window]) / window
    return ma.max(axis=-1) - ma.min(axis=-1)


def detect_artifacts(ts: TrialSet, z_thresh: float = 3.0, drift_factor: float = 5.0) -> ArtifactMask:
    """Statistical screening of per-trial means, deviations, and slow drift.

    A (trial, channel) pair is flagged when its per-trial mean or standard
    deviation is a robust outlier across trials (|z| > z_thresh with
    median/MAD scaling), or when the peak-to-peak excursion of a 0.5 s moving
    average exceeds drift_factor times the channel's median per-trial std.
    """
    if ts.n_trials < 8:
        raise ValidationError(f"artifact screening needs >= 8 trials, got {ts.n_trials}")
    data = np.asarray(ts.data, dtype=np.float64)
    means = data.mean(axis=2)
    stds = data.std(axis=2)
    z_mean = _robust_z(means)
    z_std = _robust_z(stds)
    window = max(1, int(round(0.5 * ts.sample_rate)))
    drift_ptp = _moving_average_ptp(data, window)
    drift_threshold = drift_factor * np.median(stds, axis=0)
    flags = (
        (np.abs(z_mean) > z_thresh)
        | (np.abs(z_std) > z_thresh)
        | (drift_ptp > drift_threshold[None, :])
    )
    return ArtifactMask(
        flags=flags,
        z_mean=z_mean,
        z_std=z_std,
        drift_ptp=drift_ptp,
        drift_threshold=drift_threshold,
        z_thresh=z_thresh,
        drift_factor=drift_factor,
    )


def vmd(
    x: np.ndarray,
    K: int = 6,
    alpha: float = 2000.0,
    tau: float = 0.0,
    tol: float = 1e-7,
    max_iter: int = 500,
    sample_rate: float | None = None,
) -> VmdResult:
    """Variational mode decomposition into K band-limited modes.

    ADMM iteration in the frequency domain on the mirror-extended signal:
    each mode's spectrum is updated by a Wiener filter centred at its
    current frequency, center frequencies move to their spectral centroid,
    and a dual variable (step ``tau``) enforces exact reconstruction when
    nonzero. Modes come back in the time domain, cropped to the input
    length and sorted by ascending center frequency.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("vmd requires a 1-D signal")
    if not np.all(np.isfinite(x)):
        raise ValidationError("vmd input contains non-finite samples")
    n = x.size
    if n < 16:
        raise ValidationError(f"vmd needs >= 16 samples, got {n}")
    if K < 1:
        raise ValidationError("K must be >= 1")
    if K > n // 4:
        raise ValidationError(f"K={K} too large for {n} samples (max {n // 4})")

    # Mirror extension: half-length reflections on both ends, total 2N.
    left = n // 2
    right = n - left
    mirrored = np.concatenate([x[:left][::-1], x, x[-right:][::-1]])
    total = 2 * n
    half = total // 2

    # fftshift-ordered frequency axis; we iterate on the positive half only.
    freqs_pos = (np.arange(1, total + 1) / total - 0.5 - 1.0 / total)[half:]
    f_hat = np.fft.fftshift(np.fft.fft(mirrored))
    f_plus = f_hat[half:].copy()

    u_hat = np.zeros((K, half), dtype=np.complex128)
    omega = 0.5 * np.arange(K) / K
    lam = np.zeros(half, dtype=np.complex128)

    eps = 1e-12
    residual = np.inf
    iterations = 0
    while iterations < max_iter:
        u_prev = u_hat.copy()
        sum_u = u_hat.sum(axis=0)
        for k in range(K):
            sum_others = sum_u - u_hat[k]
            numer = f_plus - sum_others + lam / 2.0
            u_new = numer / (1.0 + 2.0 * alpha * (freqs_pos - omega[k]) ** 2)
            sum_u = sum_others + u_new
            u_hat[k] = u_new
            energy = u_new.real**2 + u_new.imag**2
            denom = energy.sum()
            if denom > 0:
                omega[k] = float(np.dot(freqs_pos, energy) / denom)
        lam = lam + tau * (f_plus - sum_u)
        iterations += 1
        residual = float(
            sum(
                np.sum(np.abs(u_hat[k] - u_prev[k]) ** 2)
                / (np.sum(np.abs(u_prev[k]) ** 2) + eps)
                for k in range(K)
            )
        )
        if residual < tol:
            break

    if not np.all(np.isfinite(u_hat)):
        raise NumericalError("vmd iteration diverged (non-finite mode spectra)")

    # Hermitian-symmetric full spectrum -> real time-domain modes.
    modes = np.empty((K, n))
    neg_idx = np.arange(1, half + 1)[::-1]
    for k in range(K):
        full = np.zeros(total, dtype=np.complex128)
        full[half:] = u_hat[k]
        full[neg_idx] = np.conj(u_hat[k])
        full[0] = np.conj(full[-1])
        mode_time = np.real(np.fft.ifft(np.fft.ifftshift(full)))
        modes[k] = mode_time[left : left + n]

    order = np.argsort(omega, kind="stable")
    omega_sorted = omega[order]
    modes = modes[order]
    hz = omega_sorted * sample_rate if sample_rate is not None else None
    return VmdResult(
        modes=modes,
        center_freqs=omega_sorted,
        center_freqs_hz=hz,
        iterations=iterations,
        final_residual=residual,
    )


def remove_artifacts(
    ts: TrialSet,
    mask: ArtifactMask,
    vmd_params: VmdParams = VmdParams(),
    n_workers: int = 1,
) -> TrialSet:
    """Drop the lowest-frequency VMD mode from every flagged signal.

    Unflagged signals are copied verbatim (bitwise); the result is otherwise
    an identical TrialSet. Flagged signals are independent, so they may be
    cleaned in parallel without changing the result.
    """
    if mask.flags.shape != (ts.n_trials, ts.n_channels):
        raise ValidationError(
            f"mask shape {mask.flags.shape} does not match trial set "
            f"({ts.n_trials}, {ts.n_channels})"
        )
    data = np.array(ts.data, dtype=np.float32)
    pairs = list(zip(*np.nonzero(mask.flags)))

    def clean_one(pair):
        t, c = pair
        try:
            result = vmd(
                np.asarray(ts.data[t, c], dtype=np.float64),
                K=vmd_params.K,
                alpha=vmd_params.alpha,
                tau=vmd_params.tau,
                tol=vmd_params.tol,
                max_iter=vmd_params.max_iter,
            )
        except (ValidationError, NumericalError) as exc:
            raise type(exc)(f"trial {t}, channel {c}: {exc}") from exc
        return t, c, result.modes[1:].sum(axis=0)

    if n_workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(clean_one, pairs))
    else:
        results = [clean_one(p) for p in pairs]
    for t, c, cleaned in results:
        data[t, c] = cleaned.astype(np.float32)
    return ts.with_data(data)
