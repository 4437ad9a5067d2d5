"""Trial data model, the EIT1 container format, interval slicing, and a
ground-truth synthetic EEG generator for desk-scale verification."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from ._binio import Reader, Writer
from .errors import ValidationError

EIT1_MAGIC = b"EIT1"
EIT1_VERSION = 1

# Guard for the header dimension product (u32 fields can encode absurd sizes).
_MAX_ELEMENTS = 1 << 40


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TrialSet:
    """Segmented multi-channel EEG trials with labels and metadata.

    data has shape (n_trials, n_ch, n_samples), float32 microvolts; labels are
    class indices in [0, n_classes). Arrays are frozen after validation, so a
    TrialSet is safe to share read-only across parallel workers.
    """

    subject_id: str
    sample_rate: float
    class_names: tuple[str, ...]
    channel_names: tuple[str, ...]
    channel_positions: np.ndarray | None  # (n_ch, 2) float64, unit disc
    intervals: dict[str, tuple[int, int]]
    data: np.ndarray  # (n_trials, n_ch, n_samples) float32
    labels: np.ndarray  # (n_trials,) int64

    def __post_init__(self):
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        data = _frozen(np.asarray(self.data, dtype=np.float32))
        labels = _frozen(np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        if self.channel_positions is not None:
            object.__setattr__(
                self, "channel_positions", _frozen(np.asarray(self.channel_positions, dtype=np.float64))
            )
        object.__setattr__(self, "intervals", {k: (int(a), int(b)) for k, (a, b) in self.intervals.items()})
        self.validate()

    # -- shape accessors ---------------------------------------------------

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def validate(self) -> None:
        if self.data.ndim != 3:
            raise ValidationError(f"data must be 3-D, got shape {self.data.shape}")
        n_trials, n_ch, n_samples = self.data.shape
        if self.sample_rate <= 0 or not np.isfinite(self.sample_rate):
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        if len(self.channel_names) != n_ch:
            raise ValidationError(
                f"{len(self.channel_names)} channel names for {n_ch} channels"
            )
        if self.n_classes == 0 and n_trials > 0:
            raise ValidationError("labelled trials require at least one class name")
        if self.labels.shape != (n_trials,):
            raise ValidationError(
                f"labels shape {self.labels.shape} does not match {n_trials} trials"
            )
        if n_trials > 0:
            if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
                raise ValidationError("label out of range")
            if not np.all(np.isfinite(self.data)):
                raise ValidationError("non-finite sample in data")
        if self.channel_positions is not None:
            if self.channel_positions.shape != (n_ch, 2):
                raise ValidationError(
                    f"channel_positions shape {self.channel_positions.shape} != ({n_ch}, 2)"
                )
            norms = np.hypot(self.channel_positions[:, 0], self.channel_positions[:, 1])
            if np.any(norms > 1.0 + 1e-9):
                raise ValidationError("channel position outside the unit disc")
        for name, (start, end) in self.intervals.items():
            if not (0 <= start <= end <= n_samples):
                raise ValidationError(
                    f"interval {name!r} = ({start}, {end}) outside [0, {n_samples}]"
                )

    def with_data(self, data: np.ndarray) -> "TrialSet":
        """Same metadata, new sample array (shape-checked by validation)."""
        return replace(self, data=data)


def slice_interval(ts: TrialSet, interval_name: str) -> TrialSet:
    """Restrict every trial to a named interval; interval table is rebased."""
    if interval_name not in ts.intervals:
        raise ValidationError(
            f"unknown interval {interval_name!r}; have {sorted(ts.intervals)}"
        )
    start, end = ts.intervals[interval_name]
    new_intervals = {}
    for name, (a, b) in ts.intervals.items():
        a2, b2 = max(a - start, 0), min(b - start, end - start)
        if a2 < b2 or name == interval_name:
            new_intervals[name] = (a2, max(a2, b2))
    return replace(ts, data=ts.data[:, :, start:end], intervals=new_intervals)


# -- EIT1 container ---------------------------------------------------------


def save_trialset(ts: TrialSet, path) -> None:
    """Write ``ts`` as an EIT1 file (little-endian, deterministic bytes)."""
    w = Writer()
    w.raw(EIT1_MAGIC)
    w.u32(EIT1_VERSION)
    w.u32(ts.n_trials)
    w.u32(ts.n_channels)
    w.u32(ts.n_samples)
    w.u32(ts.n_classes)
    w.f64(ts.sample_rate)
    w.string(ts.subject_id)
    for name in ts.class_names:
        w.string(name)
    for name in ts.channel_names:
        w.string(name)
    if ts.channel_positions is None:
        w.u8(0)
    else:
        w.u8(1)
        w.array(ts.channel_positions, "f8")
    w.u32(len(ts.intervals))
    for name in sorted(ts.intervals):
        start, end = ts.intervals[name]
        w.string(name)
        w.u32(start)
        w.u32(end)
    w.array(ts.labels, "u2")
    w.array(ts.data, "f4")
    with open(path, "wb") as fh:
        fh.write(w.getvalue())


def load_trialset(path) -> TrialSet:
    """Read and fully validate an EIT1 file."""
    with open(path, "rb") as fh:
        buf = fh.read()
    r = Reader(buf, str(path))
    if r.take(4) != EIT1_MAGIC:
        raise ValidationError(f"{path}: bad magic (not an EIT1 file)")
    version = r.u32()
    if version != EIT1_VERSION:
        raise ValidationError(f"{path}: unsupported EIT1 version {version}")
    n_trials, n_ch, n_samples, n_classes = r.u32(), r.u32(), r.u32(), r.u32()
    if n_trials * n_ch * n_samples > _MAX_ELEMENTS:
        raise ValidationError(f"{path}: dimension product overflow")
    sample_rate = r.f64()
    subject_id = r.string()
    class_names = tuple(r.string() for _ in range(n_classes))
    channel_names = tuple(r.string() for _ in range(n_ch))
    positions = None
    if r.u8():
        positions = r.array("f8", n_ch * 2).reshape(n_ch, 2)
    intervals = {}
    for _ in range(r.u32()):
        name = r.string()
        intervals[name] = (r.u32(), r.u32())
    labels = r.array("u2", n_trials).astype(np.int64)
    data = r.array("f4", n_trials * n_ch * n_samples).reshape(n_trials, n_ch, n_samples)
    r.expect_end()
    return TrialSet(
        subject_id=subject_id,
        sample_rate=sample_rate,
        class_names=class_names,
        channel_names=channel_names,
        channel_positions=positions,
        intervals=intervals,
        data=data,
        labels=labels,
    )


# -- synthetic ground-truth generator ----------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Configuration for :func:`generate_synthetic`.

    Each trial is 1/f-shaped background noise plus a class-specific sinusoid
    on that class's channel subset; artifact-flagged (trial, channel) pairs
    additionally receive a sub-0.5 Hz drift.
    """

    n_trials: int = 160
    n_channels: int = 16
    n_samples: int = 640
    sample_rate: float = 256.0
    class_freqs: tuple[float, ...] = (8.0, 12.0, 20.0, 30.0)
    class_names: tuple[str, ...] = ()
    channels_per_class: int = 2
    amplitude: float = 0.5
    noise_level: float = 1.0
    artifact_prob: float = 0.0
    drift_amplitude: float = 10.0
    drift_freq: float = 0.2
    drift_kind: str = "sine"  # "sine" or "ramp"
    subject_id: str = "synthetic"

    @property
    def n_classes(self) -> int:
        return len(self.class_freqs)

    def resolved_class_names(self) -> tuple[str, ...]:
        if self.class_names:
            return self.class_names
        return tuple(f"class{i}" for i in range(self.n_classes))


@dataclass(frozen=True)
class GroundTruth:
    """Generator-side truth for a synthetic TrialSet (testing oracle)."""

    seed: int
    class_freqs: tuple[float, ...]
    class_channels: tuple[tuple[int, ...], ...]
    amplitude: float
    drift_amplitude: float
    drift_freq: float
    artifact_flags: np.ndarray = field(repr=False)  # (n_trials, n_ch) bool

    def __post_init__(self):
        object.__setattr__(self, "artifact_flags", _frozen(np.asarray(self.artifact_flags, dtype=bool)))

    def to_json(self) -> str:
        pairs = [[int(t), int(c)] for t, c in zip(*np.nonzero(self.artifact_flags))]
        return json.dumps(
            {
                "seed": self.seed,
                "class_freqs": list(self.class_freqs),
                "class_channels": [list(ch) for ch in self.class_channels],
                "amplitude": self.amplitude,
                "drift_amplitude": self.drift_amplitude,
                "drift_freq": self.drift_freq,
                "n_trials": int(self.artifact_flags.shape[0]),
                "n_channels": int(self.artifact_flags.shape[1]),
                "artifact_pairs": pairs,
            },
            indent=0,
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "GroundTruth":
        obj = json.loads(text)
        flags = np.zeros((obj["n_trials"], obj["n_channels"]), dtype=bool)
        for t, c in obj["artifact_pairs"]:
            flags[t, c] = True
        return GroundTruth(
            seed=obj["seed"],
            class_freqs=tuple(obj["class_freqs"]),
            class_channels=tuple(tuple(ch) for ch in obj["class_channels"]),
            amplitude=obj["amplitude"],
            drift_amplitude=obj["drift_amplitude"],
            drift_freq=obj["drift_freq"],
            artifact_flags=flags,
        )


def _pink_noise(rng: np.random.Generator, shape: tuple, n: int, sample_rate: float) -> np.ndarray:
    """1/f-power-shaped Gaussian noise with average per-signal std of ~1.

    Spectral amplitudes scale as 1/sqrt(max(f, 1 Hz)); the 1 Hz floor keeps
    the background from carrying drift-like energy that would confound the
    artifact oracle. Normalization is by one global factor, not per signal,
    so per-trial statistics keep their natural sampling variation (the
    artifact screen depends on that spread being real).
    """
    white = rng.standard_normal(shape + (n,))
    spec = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    shaping = 1.0 / np.sqrt(np.maximum(freqs, 1.0))
    shaping[0] = 1.0  # DC varies like any sub-1 Hz component
    shaped = np.fft.irfft(spec * shaping, n=n, axis=-1)
    return shaped / max(float(shaped.std()), 1e-30)


def generate_synthetic(spec: SynthSpec, seed: int) -> tuple[TrialSet, GroundTruth]:
    """Deterministic synthetic TrialSet plus its generation ground truth."""
    c = spec.n_classes
    if c < 1:
        raise ValidationError("at least one class frequency required")
    if len(set(spec.class_freqs)) != c:
        raise ValidationError("class frequencies must be distinct")
    nyquist = spec.sample_rate / 2.0
    for f in spec.class_freqs:
        if not (0.0 < f < nyquist):
            raise ValidationError(f"class frequency {f} Hz outside (0, Nyquist={nyquist})")
    if spec.n_trials % c != 0:
        raise ValidationError(f"n_trials={spec.n_trials} is not a multiple of {c} classes")
    if not (0.0 <= spec.artifact_prob <= 1.0):
        raise ValidationError("artifact_prob must be in [0, 1]")
    if spec.drift_freq >= 0.5:
        raise ValidationError("drift_freq must stay below 0.5 Hz")
    if spec.drift_kind not in ("sine", "ramp"):
        raise ValidationError(f"unknown drift_kind {spec.drift_kind!r}")

    n_t, n_ch, n_s = spec.n_trials, spec.n_channels, spec.n_samples
    class_channels = tuple(
        tuple((ci * spec.channels_per_class + j) % n_ch for j in range(spec.channels_per_class))
        for ci in range(c)
    )
    labels = np.arange(n_t, dtype=np.int64) % c
    t_axis = np.arange(n_s) / spec.sample_rate

    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_t)
    data = np.zeros((n_t, n_ch, n_s), dtype=np.float64)
    if spec.noise_level > 0:
        data += spec.noise_level * _pink_noise(rng, (n_t, n_ch), n_s, spec.sample_rate)

    for trial in range(n_t):
        cls = int(labels[trial])
        tone = spec.amplitude * np.sin(
            2.0 * np.pi * spec.class_freqs[cls] * t_axis + phases[trial]
        )
        for ch in class_channels[cls]:
            data[trial, ch] += tone

    flags = np.zeros((n_t, n_ch), dtype=bool)
    if spec.artifact_prob > 0:
        flags = rng.random((n_t, n_ch)) < spec.artifact_prob
        drift_phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_t, n_ch))
        for trial, ch in zip(*np.nonzero(flags)):
            if spec.drift_kind == "sine":
                drift = np.sin(2.0 * np.pi * spec.drift_freq * t_axis + drift_phases[trial, ch])
            else:
                drift = np.linspace(-1.0, 1.0, n_s)
            data[trial, ch] += spec.drift_amplitude * drift

    ts = TrialSet(
        subject_id=spec.subject_id,
        sample_rate=spec.sample_rate,
        class_names=spec.resolved_class_names(),
        channel_names=tuple(f"ch{i:02d}" for i in range(n_ch)),
        channel_positions=None,
        intervals={"action": (0, n_s)},
        data=data.astype(np.float32),
        labels=labels,
    )
    gt = GroundTruth(
        seed=seed,
        class_freqs=spec.class_freqs,
        class_channels=class_channels,
        amplitude=spec.amplitude,
        drift_amplitude=spec.drift_amplitude,
        drift_freq=spec.drift_freq,
        artifact_flags=flags,
    )
    return ts, gt
