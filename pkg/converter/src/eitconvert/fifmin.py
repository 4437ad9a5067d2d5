"""Minimal FIF tag-stream IO for processed epoch files.

Covers exactly what the converter needs from the dataset derivatives'
``*-epo.fif`` files: sampling rate, channel infos (name, calibration, unit),
and the 3-D epoch matrix. The full-featured reader for this format is the
MNE package; it is not installable in every environment, so this module
implements the published tag layout directly. Reading walks the tag stream
and ignores everything it does not need, which keeps it tolerant of richer
files; writing produces a structurally plausible file used for test
fixtures.

Everything in a FIF file is big-endian: each tag is a 16-byte header
(kind, type, size, next as i32) followed by ``size`` payload bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


class FifError(ValueError):
    """Malformed or unsupported FIF content."""


# tag kinds
FILE_ID = 100
DIR_POINTER = 101
FREE_LIST = 106
BLOCK_START = 104
BLOCK_END = 105
NCHAN = 200
SFREQ = 201
CH_INFO = 203
EPOCH = 302

# block kinds
BLOCK_MEAS = 100
BLOCK_MEAS_INFO = 101
BLOCK_PROCESSED_DATA = 110
BLOCK_MNE_EPOCHS = 373

# type codes
T_INT = 3
T_FLOAT = 4
T_DOUBLE = 5
T_ID_STRUCT = 31
T_CH_INFO_STRUCT = 30
MATRIX_FLAG = 0x40000000

CH_KIND_EEG = 2
UNIT_VOLT = 107
UNIT_NONE = 0

_CH_STRUCT = struct.Struct(">iiiffi12fii16s")
assert _CH_STRUCT.size == 96


@dataclass(frozen=True)
class ChannelInfo:
    name: str
    cal: float
    ch_range: float
    unit: int
    unit_mul: int

    @property
    def volts_scale(self) -> float:
        """Multiplier taking stored epoch values to the channel's unit."""
        return self.cal * 10.0**self.unit_mul


@dataclass(frozen=True)
class EpochsFile:
    data: np.ndarray  # (n_epochs, n_channels, n_samples), cal applied
    sfreq: float
    channels: tuple[ChannelInfo, ...]

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.channels)


def _iter_tags(buf: bytes):
    pos = 0
    while pos + 16 <= len(buf):
        kind, dtype, size, nxt = struct.unpack(">iiii", buf[pos : pos + 16])
        if size < 0 or pos + 16 + size > len(buf):
            raise FifError(f"truncated tag (kind {kind}) at offset {pos}")
        yield kind, dtype, buf[pos + 16 : pos + 16 + size]
        if nxt == -1:
            return
        pos = pos + 16 + size if nxt == 0 else nxt
        if nxt > 0 and (nxt <= 0 or nxt > len(buf)):
            raise FifError(f"bad next pointer {nxt} at offset {pos}")


def _parse_matrix(dtype_code: int, payload: bytes) -> np.ndarray:
    base = dtype_code & 0xFFFF
    if base == T_FLOAT:
        scalar = np.dtype(">f4")
    elif base == T_DOUBLE:
        scalar = np.dtype(">f8")
    else:
        raise FifError(f"unsupported matrix element type {base}")
    if len(payload) < 8:
        raise FifError("matrix payload too small")
    ndim = int(np.frombuffer(payload[-4:], ">i4")[0])
    if not (1 <= ndim <= 3):
        raise FifError(f"unsupported matrix rank {ndim}")
    dims_bytes = payload[-(ndim + 1) * 4 : -4]
    dims = np.frombuffer(dims_bytes, ">i4")[::-1]  # stored fastest-first
    data_bytes = payload[: -(ndim + 1) * 4]
    expected = int(np.prod(dims)) * scalar.itemsize
    if len(data_bytes) != expected:
        raise FifError(f"matrix payload size {len(data_bytes)} != expected {expected}")
    return np.frombuffer(data_bytes, scalar).reshape(tuple(int(d) for d in dims)).astype(np.float64)


def _parse_ch_info(payload: bytes) -> ChannelInfo:
    if len(payload) != _CH_STRUCT.size:
        raise FifError(f"channel-info struct has {len(payload)} bytes, expected {_CH_STRUCT.size}")
    fields = _CH_STRUCT.unpack(payload)
    ch_range, cal = fields[3], fields[4]
    unit, unit_mul = fields[18], fields[19]
    raw_name = fields[20]
    name = raw_name.split(b"\x00", 1)[0].decode("latin-1")
    return ChannelInfo(name=name, cal=float(cal), ch_range=float(ch_range), unit=int(unit), unit_mul=int(unit_mul))


def read_epochs_file(path) -> EpochsFile:
    """Read epochs, sampling rate, and channel infos from a FIF file.

    Per-channel calibration is applied to the returned data, mirroring the
    reference reader's behaviour for epoch files.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16:
        raise FifError(f"{path}: not a FIF file (too small)")
    first_kind = struct.unpack(">i", buf[:4])[0]
    if first_kind != FILE_ID:
        raise FifError(f"{path}: not a FIF file (no file-id tag)")

    sfreq = None
    nchan = None
    channels: list[ChannelInfo] = []
    epochs = None
    for kind, dtype, payload in _iter_tags(buf):
        if kind == SFREQ and dtype == T_FLOAT:
            sfreq = float(np.frombuffer(payload, ">f4")[0])
        elif kind == NCHAN and dtype == T_INT:
            nchan = int(np.frombuffer(payload, ">i4")[0])
        elif kind == CH_INFO and dtype == T_CH_INFO_STRUCT:
            channels.append(_parse_ch_info(payload))
        elif kind == EPOCH and dtype & MATRIX_FLAG:
            epochs = _parse_matrix(dtype, payload)

    if sfreq is None or sfreq <= 0:
        raise FifError(f"{path}: missing sampling rate")
    if epochs is None:
        raise FifError(f"{path}: no epoch data found")
    if epochs.ndim == 2:  # single epoch stored flat
        epochs = epochs[None, :, :]
    if not channels:
        raise FifError(f"{path}: no channel infos found")
    if nchan is not None and nchan != len(channels):
        raise FifError(f"{path}: channel count {len(channels)} != declared {nchan}")
    if epochs.shape[1] != len(channels):
        raise FifError(
            f"{path}: epoch matrix has {epochs.shape[1]} channels for {len(channels)} channel infos"
        )
    cal = np.array([c.cal for c in channels])
    data = epochs * cal[None, :, None]
    return EpochsFile(data=data, sfreq=sfreq, channels=tuple(channels))


# -- writer (fixtures) -----------------------------------------------------------


def _tag(kind: int, dtype: int, payload: bytes) -> bytes:
    return struct.pack(">iiii", kind, dtype, len(payload), 0) + payload


def _int_tag(kind: int, value: int) -> bytes:
    return _tag(kind, T_INT, struct.pack(">i", value))


def _ch_info_payload(index: int, name: str, cal: float, unit: int) -> bytes:
    return _CH_STRUCT.pack(
        index + 1,
        index + 1,
        CH_KIND_EEG,
        1.0,  # range
        cal,
        0,  # coil type
        *([0.0] * 12),
        unit,
        0,
        name.encode("latin-1")[:16].ljust(16, b"\x00"),
    )


def write_epochs_file(path, data: np.ndarray, sfreq: float, channel_names, cal: float = 1.0, unit: int = UNIT_VOLT) -> None:
    """Write a minimal, deterministic epochs FIF file (used for fixtures).

    ``data`` is (n_epochs, n_channels, n_samples) in the channel unit; the
    stored matrix is data / cal so that readers applying cal recover it.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise FifError("epochs data must be 3-D")
    n_epochs, n_ch, n_samples = data.shape
    if len(channel_names) != n_ch:
        raise FifError("one channel name per channel required")

    parts: list[bytes] = []
    parts.append(_tag(FILE_ID, T_ID_STRUCT, struct.pack(">5i", 65540, 0, 0, 0, 0)))
    parts.append(_int_tag(DIR_POINTER, -1))
    parts.append(_int_tag(FREE_LIST, -1))
    parts.append(_int_tag(BLOCK_START, BLOCK_MEAS))
    parts.append(_int_tag(BLOCK_START, BLOCK_MEAS_INFO))
    parts.append(_int_tag(NCHAN, n_ch))
    parts.append(_tag(SFREQ, T_FLOAT, struct.pack(">f", sfreq)))
    for i, name in enumerate(channel_names):
        parts.append(_tag(CH_INFO, T_CH_INFO_STRUCT, _ch_info_payload(i, name, cal, unit)))
    parts.append(_int_tag(BLOCK_END, BLOCK_MEAS_INFO))
    parts.append(_int_tag(BLOCK_START, BLOCK_PROCESSED_DATA))
    parts.append(_int_tag(BLOCK_START, BLOCK_MNE_EPOCHS))
    stored = (data / cal).astype(">f4")
    dims = np.array([n_samples, n_ch, n_epochs, 3], dtype=">i4")  # fastest-first + ndim
    parts.append(_tag(EPOCH, T_FLOAT | MATRIX_FLAG, stored.tobytes() + dims.tobytes()))
    parts.append(_int_tag(BLOCK_END, BLOCK_MNE_EPOCHS))
    parts.append(_int_tag(BLOCK_END, BLOCK_PROCESSED_DATA))
    parts.append(_int_tag(BLOCK_END, BLOCK_MEAS))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))
