"""Dataset layout semantics: session discovery, event tables, label mapping.

The public inner-speech dataset ships processed epochs per subject and
session under ``derivatives/sub-XX/ses-0Y/`` as ``sub-XX_ses-0Y_eeg-epo.fif``
plus ``sub-XX_ses-0Y_events.dat`` (a NumPy array saved as raw ``.npy``
bytes). Event rows are ``[onset_sample, class_id, condition_id, session]``;
condition 0 = pronounced, 1 = inner, 2 = visualized speech. Only the inner
condition is converted.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Subject directory does not follow the published layout."""


CLASS_NAMES = ("Arriba", "Abajo", "Derecha", "Izquierda")
LABEL_MAP = {name: idx for idx, name in enumerate(CLASS_NAMES)}

CONDITION_PRONOUNCED = 0
CONDITION_INNER = 1
CONDITION_VISUALIZED = 2

# The published trial protocol: concentration, cue, action, relax (seconds).
DEFAULT_TIMINGS = (0.5, 0.5, 2.5, 1.0)


@dataclass(frozen=True)
class SessionFiles:
    session_id: str
    epochs_path: Path
    events_path: Path


@dataclass(frozen=True)
class SubjectManifest:
    """What will be converted for one subject."""

    subject_id: str
    sessions: tuple[SessionFiles, ...]
    trial_counts: tuple[int, ...]  # per session, inner-speech trials only
    label_map: dict[str, int]

    @property
    def total_trials(self) -> int:
        return sum(self.trial_counts)


def discover_sessions(subject_dir) -> tuple[str, tuple[SessionFiles, ...]]:
    """Locate per-session epoch/event file pairs under a subject directory."""
    root = Path(subject_dir)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")
    subject_id = root.name
    if not subject_id.startswith("sub-"):
        raise DatasetError(f"{root}: subject directories are named sub-XX")
    sessions = []
    for ses_dir in sorted(root.glob("ses-*")):
        if not ses_dir.is_dir():
            continue
        stem = f"{subject_id}_{ses_dir.name}"
        epochs = ses_dir / f"{stem}_eeg-epo.fif"
        events = ses_dir / f"{stem}_events.dat"
        if not epochs.exists():
            raise DatasetError(f"{ses_dir}: missing {epochs.name}")
        if not events.exists():
            raise DatasetError(f"{ses_dir}: missing {events.name}")
        sessions.append(SessionFiles(session_id=ses_dir.name, epochs_path=epochs, events_path=events))
    if not sessions:
        raise DatasetError(f"{root}: no ses-* directories with epoch files")
    return subject_id, tuple(sessions)


def load_events(path) -> np.ndarray:
    """Load an events table: integer array (n_trials, 4)."""
    try:
        events = np.load(path, allow_pickle=True)
    except Exception as exc:  # np.load raises several types for bad bytes
        raise DatasetError(f"{path}: cannot read events ({exc})") from exc
    events = np.asarray(events)
    if events.ndim != 2 or events.shape[1] != 4:
        raise DatasetError(f"{path}: events must be (n_trials, 4), got {events.shape}")
    if not np.issubdtype(events.dtype, np.number):
        raise DatasetError(f"{path}: events must be numeric")
    events = events.astype(np.int64)
    bad_class = (events[:, 1] < 0) | (events[:, 1] >= len(CLASS_NAMES))
    if bad_class.any():
        value = int(events[bad_class, 1][0])
        raise DatasetError(f"{path}: unknown class code {value}")
    bad_cond = ~np.isin(events[:, 2], (CONDITION_PRONOUNCED, CONDITION_INNER, CONDITION_VISUALIZED))
    if bad_cond.any():
        value = int(events[bad_cond, 2][0])
        raise DatasetError(f"{path}: unknown condition code {value}")
    return events
