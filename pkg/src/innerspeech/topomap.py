"""Per-channel ERP summaries and scalp-topography rasterization.

Maps are rendered by inverse-distance-weighted interpolation over a square
grid clipped to the unit disc and written as binary PGM (plus a raw-field
CSV), which keeps the output bit-exact and viewer-friendly without any
imaging dependency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .trialset import TrialSet, _frozen, slice_interval

ERP_STATS = ("rms", "mean", "mean_abs")

_IDW_POWER = 2
_DIST_FLOOR = 1e-6


@dataclass(frozen=True)
class ScalpField:
    """Interpolated scalp field on a G x G grid; out-of-head cells are NaN."""

    grid: np.ndarray
    channel_values: np.ndarray
    positions: np.ndarray
    vmin: float
    vmax: float

    def __post_init__(self):
        for name in ("grid", "channel_values", "positions"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.float64)))

    @property
    def size(self) -> int:
        return self.grid.shape[0]

    @property
    def in_head(self) -> np.ndarray:
        return np.isfinite(self.grid)


def compute_erp(
    ts: TrialSet,
    interval_name: str,
    class_index: int | None = None,
    stat: str = "rms",
) -> np.ndarray:
    """Trial-averaged waveform per channel over an interval, summarized to a
    scalar per channel (default RMS of the averaged waveform)."""
    if stat not in ERP_STATS:
        raise ValidationError(f"unknown ERP stat {stat!r}; supported: {ERP_STATS}")
    sliced = slice_interval(ts, interval_name)
    if class_index is None:
        sel = np.arange(sliced.n_trials)
    else:
        if not (0 <= class_index < sliced.n_classes):
            raise ValidationError(f"class index {class_index} out of range")
        sel = np.nonzero(sliced.labels == class_index)[0]
        if sel.size == 0:
            raise ValidationError(f"no trials with class index {class_index}")
    averaged = np.asarray(sliced.data[sel], dtype=np.float64).mean(axis=0)  # (n_ch, n)
    if stat == "rms":
        return np.sqrt(np.mean(averaged**2, axis=1))
    if stat == "mean":
        return averaged.mean(axis=1)
    return np.mean(np.abs(averaged), axis=1)


def render_topomap(values: np.ndarray, positions: np.ndarray, grid_size: int = 64) -> ScalpField:
    """Inverse-distance-weighted (power 2) field over the unit disc.

    The interpolated value at any cell is a convex combination of channel
    values, so the field never leaves [min(values), max(values)].
    """
    values = np.asarray(values, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise ValidationError("positions must be (n_channels, 2)")
    if values.shape != (positions.shape[0],):
        raise ValidationError("one value per channel position required")
    if positions.shape[0] < 3:
        raise ValidationError("topomap needs at least 3 positioned channels")
    if np.any(np.hypot(positions[:, 0], positions[:, 1]) > 1.0 + 1e-9):
        raise ValidationError("channel position outside the unit disc")
    if grid_size < 16:
        raise ValidationError("grid_size must be >= 16")

    axis = np.linspace(-1.0, 1.0, grid_size)
    gx = axis[None, :]
    gy = axis[::-1][:, None]  # row 0 is the top of the head
    dist = np.sqrt(
        (gx[..., None] - positions[:, 0]) ** 2 + (gy[..., None] - positions[:, 1]) ** 2
    )
    weights = 1.0 / np.maximum(dist, _DIST_FLOOR) ** _IDW_POWER
    field = (weights @ values) / weights.sum(axis=-1)
    outside = gx**2 + gy**2 > 1.0
    field = np.where(outside, np.nan, field)
    in_vals = field[~outside]
    return ScalpField(
        grid=field,
        channel_values=values,
        positions=positions,
        vmin=float(in_vals.min()),
        vmax=float(in_vals.max()),
    )


def field_to_pgm(field: ScalpField) -> bytes:
    """Binary PGM (P5); in-head values map linearly to 0..255, outside is 0."""
    g = field.size
    span = field.vmax - field.vmin
    if span > 0:
        scaled = (field.grid - field.vmin) / span * 255.0
    else:
        scaled = np.full_like(field.grid, 255.0)
    pixels = np.where(field.in_head, np.rint(scaled), 0.0).astype(np.uint8)
    header = f"P5\n{g} {g}\n255\n".encode("ascii")
    return header + pixels.tobytes()


def field_to_csv(field: ScalpField) -> str:
    lines = []
    for row in field.grid:
        lines.append(",".join("nan" if not np.isfinite(v) else f"{v:.10g}" for v in row))
    return "\n".join(lines) + "\n"


def write_topomap(field: ScalpField, pgm_path, csv_path=None) -> None:
    with open(pgm_path, "wb") as fh:
        fh.write(field_to_pgm(field))
    if csv_path is not None:
        with open(csv_path, "w") as fh:
            fh.write(field_to_csv(field))


# -- positions table -----------------------------------------------------------


def write_positions_csv(path, channel_names, positions) -> None:
    positions = np.asarray(positions, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write("channel_name,x,y\n")
        for name, (x, y) in zip(channel_names, positions):
            fh.write(f"{name},{x:.10g},{y:.10g}\n")


def load_positions_csv(path, channel_names=None) -> np.ndarray:
    """Read a channel_name,x,y table; reordered to channel_names when given."""
    table: dict[str, tuple[float, float]] = {}
    order: list[str] = []
    with open(path) as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line or (i == 0 and line.lower().startswith("channel_name")):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValidationError(f"{path}:{i + 1}: expected 'channel_name,x,y'")
            name, xs, ys = parts
            try:
                x, y = float(xs), float(ys)
            except ValueError as exc:
                raise ValidationError(f"{path}:{i + 1}: bad coordinate") from exc
            if x * x + y * y > 1.0 + 1e-9:
                raise ValidationError(f"{path}:{i + 1}: position outside the unit disc")
            table[name] = (x, y)
            order.append(name)
    if channel_names is None:
        channel_names = order
    try:
        return np.array([table[name] for name in channel_names])
    except KeyError as exc:
        raise ValidationError(f"{path}: missing position for channel {exc.args[0]!r}") from None
