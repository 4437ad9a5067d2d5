"""Fixture builder: a miniature subject directory in the dataset's layout."""

from pathlib import Path

import numpy as np
import pytest

from eitconvert.fifmin import write_epochs_file

RATE = 256.0
N_CHANNELS = 128
N_SAMPLES = 1152  # 4.5 s at 256 Hz
CHANNEL_NAMES = tuple(f"{g}{i}" for g in "ABCD" for i in range(1, 33))


def synth_epochs(n_trials: int, seed: int) -> np.ndarray:
    """Small deterministic waves in volts (tens of microvolts peak)."""
    gen = np.random.default_rng(seed)
    t = np.arange(N_SAMPLES) / RATE
    data = 5e-6 * gen.standard_normal((n_trials, N_CHANNELS, N_SAMPLES))
    for trial in range(n_trials):
        freq = 8.0 + 2.0 * (trial % 4)
        data[trial, trial % N_CHANNELS] += 30e-6 * np.sin(2 * np.pi * freq * t)
    return data


def write_events(path: Path, rows) -> None:
    arr = np.asarray(rows, dtype=np.int64)
    with open(path, "wb") as fh:
        np.save(fh, arr)


def write_session(ses_dir: Path, subject: str, session: str, data: np.ndarray, events) -> None:
    ses_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{subject}_{session}"
    write_epochs_file(ses_dir / f"{stem}_eeg-epo.fif", data, RATE, CHANNEL_NAMES, cal=1.0)
    write_events(ses_dir / f"{stem}_events.dat", events)


def make_subject(root: Path, subject: str = "sub-99", with_electrodes: bool = False) -> Path:
    """8 balanced inner-speech trials across two sessions, plus pronounced
    and visualized trials that the converter must filter out."""
    sub_dir = root / subject
    # session 1: 6 trials, inner classes [0, 1, 2, 3] + one pronounced + one visualized
    data1 = synth_epochs(6, seed=1)
    events1 = [
        [0, 0, 1, 1],
        [1152, 1, 1, 1],
        [2304, 2, 1, 1],
        [3456, 3, 1, 1],
        [4608, 0, 0, 1],  # pronounced, dropped
        [5760, 1, 2, 1],  # visualized, dropped
    ]
    write_session(sub_dir / "ses-01", subject, "ses-01", data1, events1)
    # session 2: 4 inner trials, classes [0, 1, 2, 3]
    data2 = synth_epochs(4, seed=2)
    events2 = [
        [0, 2, 1, 2],
        [1152, 3, 1, 2],
        [2304, 0, 1, 2],
        [3456, 1, 1, 2],
    ]
    write_session(sub_dir / "ses-02", subject, "ses-02", data2, events2)
    if with_electrodes:
        write_electrodes_tsv(sub_dir / "ses-01" / f"{subject}_ses-01_electrodes.tsv")
    return sub_dir


def write_electrodes_tsv(path: Path) -> None:
    """128 sites on a spherical cap (name, x, y, z in head coordinates)."""
    gen = np.arange(N_CHANNELS)
    polar = 0.2 + 1.2 * (gen % 16) / 16.0
    azimuth = 2 * np.pi * gen / N_CHANNELS
    radius = 0.095  # ~9.5 cm head
    lines = ["name\tx\ty\tz"]
    for name, p, a in zip(CHANNEL_NAMES, polar, azimuth):
        x = radius * np.sin(p) * np.cos(a)
        y = radius * np.sin(p) * np.sin(a)
        z = radius * np.cos(p)
        lines.append(f"{name}\t{x:.6f}\t{y:.6f}\t{z:.6f}")
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture()
def subject_dir(tmp_path):
    return make_subject(tmp_path)


@pytest.fixture()
def subject_dir_with_electrodes(tmp_path):
    return make_subject(tmp_path, with_electrodes=True)
