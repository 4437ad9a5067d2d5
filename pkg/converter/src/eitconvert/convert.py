"""Subject conversion: dataset derivatives -> EIT1 trial set + positions CSV."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (
    CLASS_NAMES,
    CONDITION_INNER,
    DEFAULT_TIMINGS,
    DatasetError,
    LABEL_MAP,
    SubjectManifest,
    discover_sessions,
    load_events,
)
from .eitwriter import write_eit1
from .fifmin import UNIT_VOLT, read_epochs_file
from .positions import positions_for, write_positions_csv

INTERVAL_NAMES = ("concentration", "cue", "action", "relax")


@dataclass(frozen=True)
class ConversionResult:
    manifest: SubjectManifest
    out_path: Path
    positions_path: Path
    positions_source: str
    n_trials: int
    class_counts: tuple[int, ...]
    warnings: tuple[str, ...]


def _interval_table(sample_rate: float, n_samples: int, timings) -> dict[str, tuple[int, int]]:
    edges = np.cumsum((0.0,) + tuple(timings))
    table = {}
    for name, start_s, end_s in zip(INTERVAL_NAMES, edges[:-1], edges[1:]):
        start = int(round(start_s * sample_rate))
        end = min(int(round(end_s * sample_rate)), n_samples)
        table[name] = (start, end)
    if table["action"][1] - table["action"][0] < 1:
        raise DatasetError(
            f"trials of {n_samples} samples cannot hold the action interval "
            f"({timings[0] + timings[1]:.2f}-{timings[0] + timings[1] + timings[2]:.2f} s)"
        )
    return table


def convert_subject(
    subject_dir,
    out_path,
    *,
    interval: str = "action",
    positions_out=None,
    expected_rate: float = 256.0,
    expected_channels: int = 128,
    timings=DEFAULT_TIMINGS,
) -> ConversionResult:
    """Concatenate all sessions' inner-speech trials into one EIT1 file.

    ``interval`` is "action" (slice every trial to the action window) or
    "full" (whole trials with all four interval markers). The sampling rate
    and channel count are verified against the dataset's published values.
    Output bytes are a pure function of the input files.
    """
    if interval not in ("action", "full"):
        raise DatasetError(f"interval must be 'action' or 'full', got {interval!r}")
    subject_id, sessions = discover_sessions(subject_dir)
    out_path = Path(out_path)

    data_blocks = []
    label_blocks = []
    trial_counts = []
    channel_names = None
    n_samples = None
    warnings: list[str] = []
    for session in sessions:
        epochs = read_epochs_file(session.epochs_path)
        if abs(epochs.sfreq - expected_rate) > 1e-6:
            raise DatasetError(
                f"{session.epochs_path}: sampling rate {epochs.sfreq:g} Hz, expected {expected_rate:g}"
            )
        if len(epochs.channels) != expected_channels:
            raise DatasetError(
                f"{session.epochs_path}: {len(epochs.channels)} channels, expected {expected_channels}"
            )
        if channel_names is None:
            channel_names = epochs.channel_names
            n_samples = epochs.data.shape[2]
        elif epochs.channel_names != channel_names:
            raise DatasetError(f"{session.epochs_path}: channel names differ between sessions")
        elif epochs.data.shape[2] != n_samples:
            raise DatasetError(f"{session.epochs_path}: trial length differs between sessions")

        events = load_events(session.events_path)
        if events.shape[0] != epochs.data.shape[0]:
            raise DatasetError(
                f"{session.events_path}: {events.shape[0]} event rows for "
                f"{epochs.data.shape[0]} epochs"
            )
        inner = events[:, 2] == CONDITION_INNER
        if not inner.any():
            warnings.append(f"{session.session_id}: no inner-speech trials")
        session_data = epochs.data[inner]
        # store microvolts; epoch values are in the channel unit (volts)
        scale = np.array(
            [1e6 * 10.0**c.unit_mul if c.unit == UNIT_VOLT else 1.0 for c in epochs.channels]
        )
        session_data = session_data * scale[None, :, None]
        data_blocks.append(session_data)
        label_blocks.append(events[inner, 1])
        trial_counts.append(int(inner.sum()))

    data = np.concatenate(data_blocks, axis=0)
    labels = np.concatenate(label_blocks)
    if not np.all(np.isfinite(data)):
        raise DatasetError(f"{subject_id}: non-finite samples in epoch data")

    intervals = _interval_table(expected_rate, n_samples, timings)
    if interval == "action":
        start, end = intervals["action"]
        data = data[:, :, start:end]
        intervals = {"action": (0, end - start)}

    counts = np.bincount(labels, minlength=len(CLASS_NAMES))
    if counts.max() != counts.min():
        warnings.append(f"unbalanced class counts {counts.tolist()}")

    positions, source = positions_for(subject_dir, channel_names)
    positions_path = (
        Path(positions_out)
        if positions_out is not None
        else out_path.with_name(out_path.stem + ".positions.csv")
    )

    write_eit1(
        out_path,
        subject_id=subject_id,
        sample_rate=expected_rate,
        class_names=CLASS_NAMES,
        channel_names=channel_names,
        intervals=intervals,
        data=data.astype(np.float32),
        labels=labels,
        positions=positions,
    )
    write_positions_csv(positions_path, channel_names, positions)

    manifest = SubjectManifest(
        subject_id=subject_id,
        sessions=sessions,
        trial_counts=tuple(trial_counts),
        label_map=dict(LABEL_MAP),
    )
    report = {
        "subject_id": subject_id,
        "sessions": [s.session_id for s in sessions],
        "inner_trials_per_session": list(manifest.trial_counts),
        "class_counts": counts.tolist(),
        "interval": interval,
        "positions_source": source,
        "warnings": warnings,
    }
    out_path.with_name(out_path.stem + ".report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    return ConversionResult(
        manifest=manifest,
        out_path=out_path,
        positions_path=positions_path,
        positions_source=source,
        n_trials=int(data.shape[0]),
        class_counts=tuple(int(c) for c in counts),
        warnings=tuple(warnings),
    )
