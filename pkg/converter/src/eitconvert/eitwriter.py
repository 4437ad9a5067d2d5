"""Independent EIT1 writer.

This deliberately implements the published wire format rather than importing
the core toolkit: the file format is the interface between the two packages,
and keeping the writer independent means a conversion can never silently
depend on core-library internals. Layout (little-endian):

magic "EIT1", version u32, n_trials u32, n_ch u32, n_samples u32,
n_classes u32, sample_rate f64; length-prefixed UTF-8 strings (subject id,
class names, channel names); position flag u8 (+ n_ch x 2 f64);
interval table (count u32; per entry: name, start u32, end u32; sorted by
name); labels u16; data f32 trial-major then channel-major.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"EIT1"
VERSION = 1


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def write_eit1(
    path,
    *,
    subject_id: str,
    sample_rate: float,
    class_names,
    channel_names,
    intervals: dict[str, tuple[int, int]],
    data: np.ndarray,
    labels: np.ndarray,
    positions: np.ndarray | None = None,
) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<u2")
    n_trials, n_ch, n_samples = data.shape
    if labels.shape != (n_trials,):
        raise ValueError("one label per trial required")
    if len(channel_names) != n_ch:
        raise ValueError("one name per channel required")

    parts = [
        MAGIC,
        struct.pack("<IIIII", VERSION, n_trials, n_ch, n_samples, len(class_names)),
        struct.pack("<d", sample_rate),
        _string(subject_id),
    ]
    parts += [_string(name) for name in class_names]
    parts += [_string(name) for name in channel_names]
    if positions is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01")
        parts.append(np.ascontiguousarray(positions, dtype="<f8").tobytes())
    parts.append(struct.pack("<I", len(intervals)))
    for name in sorted(intervals):
        start, end = intervals[name]
        parts.append(_string(name))
        parts.append(struct.pack("<II", int(start), int(end)))
    parts.append(labels.tobytes())
    parts.append(data.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))
