"""Electrode positions: BIDS electrodes.tsv projection, schematic fallback,
and the unit-disc CSV table the topomap side consumes."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import DatasetError

_MARGIN = 0.95  # keep projected sites inside the disc with a visual margin
_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def find_electrodes_tsv(subject_dir) -> Path | None:
    """First electrodes.tsv under the subject directory (BIDS sidecar)."""
    root = Path(subject_dir)
    hits = sorted(root.rglob("*electrodes.tsv"))
    return hits[0] if hits else None


def load_electrodes_tsv(path) -> dict[str, np.ndarray]:
    """Parse a BIDS electrodes.tsv into {name: xyz}."""
    rows = Path(path).read_text().strip().splitlines()
    if not rows:
        raise DatasetError(f"{path}: empty electrodes table")
    header = [h.strip().lower() for h in rows[0].split("\t")]
    try:
        idx = {k: header.index(k) for k in ("name", "x", "y", "z")}
    except ValueError as exc:
        raise DatasetError(f"{path}: electrodes.tsv needs name/x/y/z columns") from exc
    table = {}
    for lineno, row in enumerate(rows[1:], start=2):
        parts = row.split("\t")
        if len(parts) < len(header):
            raise DatasetError(f"{path}:{lineno}: short row")
        try:
            xyz = np.array([float(parts[idx[k]]) for k in ("x", "y", "z")])
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: bad coordinate") from exc
        table[parts[idx["name"]].strip()] = xyz
    return table


def project_to_disc(xyz_by_name: dict[str, np.ndarray], channel_names) -> np.ndarray:
    """Azimuthal-equidistant top view: polar angle from the vertex becomes the
    radius, normalized over the montage so every site lands in the disc."""
    missing = [n for n in channel_names if n not in xyz_by_name]
    if missing:
        raise DatasetError(f"electrodes table is missing channels: {missing[:5]}")
    xyz = np.stack([xyz_by_name[n] for n in channel_names])
    center = xyz.mean(axis=0)
    rel = xyz - center
    radii = np.linalg.norm(rel, axis=1)
    if np.any(radii == 0):
        raise DatasetError("degenerate electrode position at the head center")
    polar = np.arccos(np.clip(rel[:, 2] / radii, -1.0, 1.0))
    planar = np.hypot(rel[:, 0], rel[:, 1])
    safe = np.where(planar > 0, planar, 1.0)
    scale = _MARGIN * polar / max(float(polar.max()), 1e-12)
    x = scale * rel[:, 0] / safe
    y = scale * rel[:, 1] / safe
    x[planar == 0] = 0.0
    y[planar == 0] = 0.0
    return np.stack([x, y], axis=1)


def schematic_positions(n_channels: int) -> np.ndarray:
    """Deterministic Fibonacci-spiral layout: valid, distinct, unit-disc
    positions when no montage data ships with the recording."""
    i = np.arange(n_channels)
    r = _MARGIN * np.sqrt((i + 0.5) / n_channels)
    theta = i * _GOLDEN_ANGLE
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def positions_for(subject_dir, channel_names) -> tuple[np.ndarray, str]:
    """(positions, source) where source is 'electrodes.tsv' or 'schematic'."""
    tsv = find_electrodes_tsv(subject_dir)
    if tsv is not None:
        return project_to_disc(load_electrodes_tsv(tsv), channel_names), "electrodes.tsv"
    return schematic_positions(len(channel_names)), "schematic"


def write_positions_csv(path, channel_names, positions) -> None:
    positions = np.asarray(positions, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write("channel_name,x,y\n")
        for name, (x, y) in zip(channel_names, positions):
            fh.write(f"{name},{x:.10g},{y:.10g}\n")
