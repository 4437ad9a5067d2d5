"""Per-channel TD/FD/TFD feature catalog, matrix assembly, and leakage-safe
standardization, plus the EIT-F on-disk matrix container."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from ._binio import Reader, Writer
from .errors import NumericalError, ValidationError
from .signal_math import WAVELET_FILTERS, dwt, hilbert_envelope, psd
from .trialset import TrialSet, _frozen

EITF_MAGIC = b"EITF"
EITF_VERSION = 1

DOMAINS = ("TD", "FD", "TFD")
_DOMAIN_CODES = {"TD": 0, "FD": 1, "TFD": 2}
_DOMAIN_NAMES = {v: k for k, v in _DOMAIN_CODES.items()}

EEG_BANDS = (
    ("delta", 0.5, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 13.0),
    ("beta", 13.0, 30.0),
    ("gamma", 30.0, 100.0),
)

TD_EXTRA_STATS = ("mad", "mean_abs_diff", "max_abs")

_HIST_BINS = 16


@dataclass(frozen=True)
class FeatureDescriptor:
    channel_index: int
    domain: str  # TD | FD | TFD
    name: str
    params: tuple[tuple[str, str], ...] = ()

    @property
    def key(self) -> tuple:
        return (self.channel_index, self.domain, self.name, self.params)

    def params_dict(self) -> dict[str, str]:
        return dict(self.params)

    def label(self) -> str:
        suffix = "".join(f"[{k}={v}]" for k, v in self.params)
        return f"ch{self.channel_index}:{self.domain}:{self.name}{suffix}"


@dataclass(frozen=True)
class FeatureMatrix:
    """Trials x features table with column descriptors and labels."""

    values: np.ndarray  # (n_trials, n_features) float64
    descriptors: tuple[FeatureDescriptor, ...]
    labels: np.ndarray  # (n_trials,) int64
    provenance: str

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=np.float64)))
        object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int64)))
        object.__setattr__(self, "descriptors", tuple(self.descriptors))
        if self.values.ndim != 2:
            raise ValidationError("feature values must be 2-D")
        if len(self.descriptors) != self.values.shape[1]:
            raise ValidationError("descriptor count does not match column count")
        if self.labels.shape != (self.values.shape[0],):
            raise ValidationError("label count does not match row count")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValidationError("feature matrix contains non-finite values")
        keys = {d.key for d in self.descriptors}
        if len(keys) != len(self.descriptors):
            raise ValidationError("duplicate feature descriptors")

    @property
    def n_trials(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass(frozen=True)
class Scaler:
    """Per-column z-scoring parameters; std is floored at 1e-12 so constant
    columns map to exactly 0."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(np.asarray(self.mean, dtype=np.float64)))
        object.__setattr__(self, "std", _frozen(np.asarray(self.std, dtype=np.float64)))
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValidationError("scaler mean/std must be matching 1-D arrays")

    def transform(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.mean.size:
            raise ValidationError(
                f"scaler fitted for {self.mean.size} columns, got {values.shape[-1]}"
            )
        return (values - self.mean) / self.std


# -- time-domain features ----------------------------------------------------


def _hist_entropy(x: np.ndarray) -> float:
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        return 0.0
    counts, _ = np.histogram(x, bins=_HIST_BINS, range=(lo, hi))
    p = counts[counts > 0] / x.size
    return float(-np.sum(p * np.log(p)))


def extract_td(x: np.ndarray, sample_rate: float, extras: tuple[str, ...] = ()) -> tuple[np.ndarray, list[str]]:
    """Time-domain statistics of one signal; returns (values, names)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 16:
        raise ValidationError("extract_td requires >= 16 samples")
    diffs = np.diff(x)
    mean = float(x.mean())
    std = float(x.std())
    var = float(x.var())
    centered = x - mean
    if std > 0:
        skew = float(np.mean(centered**3) / std**3)
        kurt = float(np.mean(centered**4) / std**4 - 3.0)
    else:
        skew = kurt = 0.0
    rms = float(np.sqrt(np.mean(x**2)))
    mav = float(np.mean(np.abs(x)))
    ptp = float(x.max() - x.min())
    q75, q25 = np.percentile(x, [75, 25])
    zc = int(np.sum(x[:-1] * x[1:] < 0))
    ssc = int(np.sum(diffs[:-1] * diffs[1:] < 0))
    wl = float(np.sum(np.abs(diffs)))
    wamp = int(np.sum(np.abs(diffs) > 0.1 * std))
    log_energy = float(np.log(np.sum(x**2) + 1e-12))
    activity = var
    dvar = float(diffs.var()) if diffs.size else 0.0
    mobility = float(np.sqrt(dvar / var)) if var > 0 else 0.0
    d2 = np.diff(diffs)
    d2var = float(d2.var()) if d2.size else 0.0
    mobility_d = float(np.sqrt(d2var / dvar)) if dvar > 0 else 0.0
    complexity = mobility_d / mobility if mobility > 0 else 0.0
    env = hilbert_envelope(x)

    values = [
        mean,
        float(np.median(x)),
        std,
        var,
        skew,
        kurt,
        rms,
        mav,
        ptp,
        float(q75 - q25),
        float(zc),
        float(ssc),
        wl,
        float(wamp),
        log_energy,
        activity,
        mobility,
        complexity,
        _hist_entropy(x),
        float(env.mean()),
        float(env.std()),
        float(env.max()),
        float(np.median(env)),
    ]
    names = [
        "mean",
        "median",
        "std",
        "var",
        "skew",
        "kurt",
        "rms",
        "mav",
        "ptp",
        "iqr",
        "zc",
        "ssc",
        "wl",
        "wamp",
        "log_energy",
        "hjorth_activity",
        "hjorth_mobility",
        "hjorth_complexity",
        "hist_entropy",
        "env_mean",
        "env_std",
        "env_max",
        "env_median",
    ]
    for extra in extras:
        if extra == "mad":
            values.append(float(np.median(np.abs(x - np.median(x)))))
        elif extra == "mean_abs_diff":
            values.append(float(np.mean(np.abs(diffs))) if diffs.size else 0.0)
        elif extra == "max_abs":
            values.append(float(np.max(np.abs(x))))
        else:
            raise ValidationError(f"unknown TD extra {extra!r}; supported: {TD_EXTRA_STATS}")
        names.append(extra)
    return np.array(values), names


# -- frequency-domain features -------------------------------------------------


def extract_fd(
    x: np.ndarray,
    sample_rate: float,
    extra_bands: tuple[tuple[float, float], ...] = (),
) -> tuple[np.ndarray, list[str]]:
    """Spectral-shape features from the Hann periodogram; returns (values, names)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 64:
        raise ValidationError("extract_fd requires >= 64 samples")
    spectrum = psd(x, sample_rate, window="hann")
    freqs, power = spectrum.freqs, spectrum.power
    total = float(power.sum())
    nyquist = sample_rate / 2.0

    if total > 0:
        p = power / total
        dom = float(freqs[int(np.argmax(power))])
        centroid = float(np.sum(p * freqs))
        cum = np.cumsum(p)
        median_f = float(freqs[int(np.searchsorted(cum, 0.5))])
        rolloff = float(freqs[int(np.searchsorted(cum, 0.85))])
        spread = float(np.sqrt(np.sum(p * (freqs - centroid) ** 2)))
        if spread > 0:
            spec_skew = float(np.sum(p * (freqs - centroid) ** 3) / spread**3)
            spec_kurt = float(np.sum(p * (freqs - centroid) ** 4) / spread**4 - 3.0)
        else:
            spec_skew = spec_kurt = 0.0
        nz = p[p > 0]
        spec_entropy = float(-np.sum(nz * np.log(nz)) / np.log(p.size)) if p.size > 1 else 0.0
        flatness = float(np.exp(np.mean(np.log(np.maximum(power, 1e-20)))) / np.mean(power))
    else:
        dom = centroid = median_f = rolloff = 0.0
        spec_skew = spec_kurt = spec_entropy = flatness = 0.0

    fit_sel = (freqs >= 0.5) & (freqs <= 100.0)
    if fit_sel.sum() >= 2:
        fx = freqs[fit_sel]
        fy = np.log10(np.maximum(power[fit_sel], 1e-20))
        fx_c = fx - fx.mean()
        denom = float(np.sum(fx_c**2))
        slope = float(np.sum(fx_c * (fy - fy.mean())) / denom) if denom > 0 else 0.0
    else:
        slope = 0.0

    values = [dom, centroid, median_f, rolloff, slope, spec_skew, spec_kurt, spec_entropy, flatness]
    names = ["dom_freq", "centroid", "median_freq", "rolloff85", "slope", "spec_skew", "spec_kurt", "spec_entropy", "flatness"]

    total_int = spectrum.total_power
    bands = [(name, lo, min(hi, nyquist)) for name, lo, hi in EEG_BANDS]
    bands += [(f"band_{lo:g}_{hi:g}", lo, min(hi, nyquist)) for lo, hi in extra_bands]
    abs_powers = [spectrum.band_power(lo, hi) for _, lo, hi in bands]
    for (name, _, _), bp in zip(bands, abs_powers):
        values.append(bp)
        names.append(f"bp_{name}")
    for (name, _, _), bp in zip(bands, abs_powers):
        values.append(bp / total_int if total_int > 0 else 0.0)
        names.append(f"rbp_{name}")
    return np.array(values), names


# -- time-frequency features ---------------------------------------------------


def katz_fd(y: np.ndarray) -> float:
    """Katz fractal dimension of a sequence; 0 for constant input."""
    y = np.asarray(y, dtype=np.float64)
    if y.size < 2:
        return 0.0
    length = float(np.sum(np.abs(np.diff(y))))
    extent = float(np.max(np.abs(y - y[0])))
    if length <= 0 or extent <= 0:
        return 0.0
    n = y.size - 1
    return float(np.log10(n) / (np.log10(n) + np.log10(extent / length)))


def extract_tfd(
    x: np.ndarray,
    sample_rate: float,
    wavelet: str = "db4",
    levels: int = 5,
) -> tuple[np.ndarray, list[str], list[str]]:
    """Per-subband DWT statistics; returns (values, names, subband ids)."""
    x = np.asarray(x, dtype=np.float64)
    dec = dwt(x, wavelet=wavelet, levels=levels)
    subband_ids = [f"d{i}" for i in range(1, levels + 1)] + [f"a{levels}"]
    values: list[float] = []
    names: list[str] = []
    bands: list[str] = []
    for sb_id, coeffs in zip(subband_ids, dec.subbands):
        d = np.diff(coeffs)
        stats = [
            float(np.mean(coeffs**2)),
            float(np.mean(np.abs(coeffs))),
            float(np.sum(np.abs(d))) if d.size else 0.0,
            float(np.sqrt(np.mean(coeffs**2))),
            float(np.std(coeffs)),
            katz_fd(coeffs),
        ]
        for stat_name, v in zip(("bp", "mav", "wl", "rms", "std", "kfd"), stats):
            values.append(v)
            names.append(stat_name)
            bands.append(sb_id)
    return np.array(values), names, bands


# -- catalog and matrix assembly ------------------------------------------------


@dataclass(frozen=True)
class FeatureCatalog:
    """Which per-channel features to extract.

    The default catalog is 23 TD + 19 FD + 36 TFD = 78 features per channel.
    The knobs below exist so the per-channel count can be configured (for
    example to a 191-feature target): extra TD stats, extra FD bands (each
    adds an absolute and a relative power), and additional DWT configs
    (each adds 6 x (levels+1) features).
    """

    include_td: bool = True
    td_extras: tuple[str, ...] = ()
    include_fd: bool = True
    fd_extra_bands: tuple[tuple[float, float], ...] = ()
    tfd_configs: tuple[tuple[str, int], ...] = (("db4", 5),)

    def __post_init__(self):
        object.__setattr__(self, "td_extras", tuple(self.td_extras))
        object.__setattr__(
            self, "fd_extra_bands", tuple((float(a), float(b)) for a, b in self.fd_extra_bands)
        )
        object.__setattr__(
            self, "tfd_configs", tuple((str(w), int(l)) for w, l in self.tfd_configs)
        )
        for extra in self.td_extras:
            if extra not in TD_EXTRA_STATS:
                raise ValidationError(f"unknown TD extra {extra!r}")
        for w, l in self.tfd_configs:
            if w not in WAVELET_FILTERS:
                raise ValidationError(f"unknown wavelet {w!r}")
            if l < 1:
                raise ValidationError("wavelet levels must be >= 1")
        if len(set(self.tfd_configs)) != len(self.tfd_configs):
            raise ValidationError("duplicate TFD configs")

    @property
    def per_channel_count(self) -> int:
        n = 0
        if self.include_td:
            n += 23 + len(self.td_extras)
        if self.include_fd:
            n += 19 + 2 * len(self.fd_extra_bands)
        for _, levels in self.tfd_configs:
            n += 6 * (levels + 1)
        return n

    @property
    def version(self) -> str:
        return (
            f"td={int(self.include_td)}+{len(self.td_extras)}x;"
            f"fd={int(self.include_fd)}+{len(self.fd_extra_bands)}b;"
            f"tfd={','.join(f'{w}:{l}' for w, l in self.tfd_configs)}"
        )


PAPER_SCALE_CATALOG = FeatureCatalog(
    td_extras=("mad", "mean_abs_diff", "max_abs"),
    fd_extra_bands=((8.0, 12.0), (12.0, 15.0), (13.0, 20.0), (20.0, 30.0)),
    tfd_configs=(("db4", 5), ("db2", 5), ("haar", 5), ("db4", 4)),
)  # 26 TD + 27 FD + 138 TFD = 191 per channel


def _extract_channel(x: np.ndarray, sample_rate: float, catalog: FeatureCatalog):
    values: list[np.ndarray] = []
    meta: list[tuple[str, str, tuple[tuple[str, str], ...]]] = []
    if catalog.include_td:
        v, names = extract_td(x, sample_rate, extras=catalog.td_extras)
        values.append(v)
        meta.extend(("TD", n, ()) for n in names)
    if catalog.include_fd:
        v, names = extract_fd(x, sample_rate, extra_bands=catalog.fd_extra_bands)
        values.append(v)
        meta.extend(("FD", n, ()) for n in names)
    for wavelet, levels in catalog.tfd_configs:
        v, names, bands = extract_tfd(x, sample_rate, wavelet=wavelet, levels=levels)
        values.append(v)
        meta.extend(
            ("TFD", n, (("wavelet", wavelet), ("levels", str(levels)), ("subband", b)))
            for n, b in zip(names, bands)
        )
    return np.concatenate(values) if values else np.empty(0), meta


def build_feature_matrix(ts: TrialSet, catalog: FeatureCatalog = FeatureCatalog()) -> FeatureMatrix:
    """Extract the catalog for every (trial, channel); columns are channel-major.

    Non-finite feature values are a hard error (they indicate extraction or
    configuration bugs, and silent imputation would hide them).
    """
    per_ch = catalog.per_channel_count
    n_features = ts.n_channels * per_ch
    _, meta = _extract_channel(np.zeros(ts.n_samples), ts.sample_rate, catalog)
    descriptors = [
        FeatureDescriptor(ch, domain, name, params)
        for ch in range(ts.n_channels)
        for domain, name, params in meta
    ]
    values = np.empty((ts.n_trials, n_features))
    for trial in range(ts.n_trials):
        for ch in range(ts.n_channels):
            sig = np.asarray(ts.data[trial, ch], dtype=np.float64)
            try:
                v, _ = _extract_channel(sig, ts.sample_rate, catalog)
            except (ValidationError, NumericalError) as exc:
                raise type(exc)(f"trial {trial}, channel {ch}: {exc}") from exc
            bad = ~np.isfinite(v)
            if bad.any():
                j = int(np.nonzero(bad)[0][0])
                raise NumericalError(
                    f"non-finite feature at trial {trial}, channel {ch}, "
                    f"feature {meta[j][0]}:{meta[j][1]}"
                )
            values[trial, ch * per_ch : (ch + 1) * per_ch] = v
    return FeatureMatrix(
        values=values,
        descriptors=tuple(descriptors),
        labels=ts.labels,
        provenance=f"{ts.subject_id}|catalog:{catalog.version}",
    )


def fit_scaler(fm: FeatureMatrix, rows: np.ndarray | None = None) -> Scaler:
    """Column means/stds from the given row subset (all rows by default)."""
    if rows is None:
        rows = np.arange(fm.n_trials)
    rows = np.asarray(rows)
    if rows.size == 0:
        raise ValidationError("scaler fit needs a non-empty row subset")
    sub = fm.values[rows]
    return Scaler(mean=sub.mean(axis=0), std=np.maximum(sub.std(axis=0), 1e-12))


def apply_scaler(fm: FeatureMatrix, scaler: Scaler) -> FeatureMatrix:
    return replace(fm, values=scaler.transform(fm.values))


# -- EIT-F container -------------------------------------------------------------


def save_feature_matrix(fm: FeatureMatrix, path) -> None:
    w = Writer()
    w.raw(EITF_MAGIC)
    w.u32(EITF_VERSION)
    w.u32(fm.n_trials)
    w.u32(fm.n_features)
    w.u32(fm.n_classes)
    w.string(fm.provenance)
    w.array(fm.labels, "u2")
    for d in fm.descriptors:
        w.u32(d.channel_index)
        w.u8(_DOMAIN_CODES[d.domain])
        w.string(d.name)
        w.string(json.dumps(d.params, sort_keys=False))
    w.array(fm.values, "f8")
    with open(path, "wb") as fh:
        fh.write(w.getvalue())


def load_feature_matrix(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        buf = fh.read()
    r = Reader(buf, str(path))
    if r.take(4) != EITF_MAGIC:
        raise ValidationError(f"{path}: bad magic (not an EIT-F file)")
    version = r.u32()
    if version != EITF_VERSION:
        raise ValidationError(f"{path}: unsupported EIT-F version {version}")
    n_rows, n_cols, _n_classes = r.u32(), r.u32(), r.u32()
    if n_rows * n_cols > (1 << 40):
        raise ValidationError(f"{path}: dimension product overflow")
    provenance = r.string()
    labels = r.array("u2", n_rows).astype(np.int64)
    descriptors = []
    for _ in range(n_cols):
        ch = r.u32()
        code = r.u8()
        if code not in _DOMAIN_NAMES:
            raise ValidationError(f"{path}: unknown feature domain code {code}")
        name = r.string()
        params = tuple(tuple(p) for p in json.loads(r.string()))
        descriptors.append(FeatureDescriptor(ch, _DOMAIN_NAMES[code], name, params))
    values = r.array("f8", n_rows * n_cols).reshape(n_rows, n_cols)
    r.expect_end()
    return FeatureMatrix(values=values, descriptors=tuple(descriptors), labels=labels, provenance=provenance)


def catalog_manifest_csv(fm: FeatureMatrix) -> str:
    """Human-readable column manifest (CSV) for a feature matrix."""
    lines = ["column,channel_index,domain,name,params"]
    for i, d in enumerate(fm.descriptors):
        params = ";".join(f"{k}={v}" for k, v in d.params)
        lines.append(f"{i},{d.channel_index},{d.domain},{d.name},{params}")
    return "\n".join(lines) + "\n"
