"""Bit-exact pullback container I/O.

A pullback is a directory holding `meta.json` and `frames.raw` (uint16
little-endian, frame-major, then A-line-major, r fastest-varying). Label
volumes use the same layout as `labels.raw` (uint8) and external calcium
probability maps as `probs.raw` (float32 little-endian, values in [0, 1]).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError, VersionMismatch
from .model import Calibration, Pullback

META_NAME = "meta.json"
FRAMES_NAME = "frames.raw"
LABELS_NAME = "labels.raw"
PROBS_NAME = "probs.raw"

FORMAT_VERSION = 1

_REQUIRED_META = (
    "id",
    "n_frames",
    "n_alines",
    "n_r",
    "r_pixel_um",
    "frame_spacing_mm",
    "z_offset_px",
)


def read_meta(path: Path) -> dict:
    meta_path = Path(path) / META_NAME
    if not meta_path.is_file():
        raise FormatError(f"missing {META_NAME} in {path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{META_NAME} is not valid JSON: {exc}") from exc
    if meta.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise VersionMismatch(f"unknown container version {meta.get('version')!r}")
    for key in _REQUIRED_META:
        if key not in meta:
            raise FormatError(f"{META_NAME} missing required key {key!r}")
    for key in ("n_frames", "n_alines", "n_r"):
        if not isinstance(meta[key], int) or meta[key] <= 0:
            raise FormatError(f"{META_NAME} key {key!r} must be a positive integer")
    return meta


def _read_raw(path: Path, dtype: np.dtype, shape: tuple[int, int, int]) -> np.ndarray:
    expected = int(np.prod(shape)) * dtype.itemsize
    actual = path.stat().st_size
    if actual != expected:
        # the offset where the file ends/diverges from the expected length
        raise FormatError(
            f"{path.name} has {actual} bytes, expected {expected}",
            offset=min(actual, expected),
        )
    data = np.fromfile(path, dtype=dtype)
    return data.reshape(shape)


def load_pullback(path: str | Path) -> Pullback:
    """Load a pullback container directory."""
    path = Path(path)
    meta = read_meta(path)
    shape = (meta["n_frames"], meta["n_alines"], meta["n_r"])
    frames_path = path / FRAMES_NAME
    if not frames_path.is_file():
        raise FormatError(f"missing {FRAMES_NAME} in {path}")
    pixels = _read_raw(frames_path, np.dtype("<u2"), shape)
    cal = Calibration(
        r_pixel_um=float(meta["r_pixel_um"]),
        frame_spacing_mm=float(meta["frame_spacing_mm"]),
        z_offset_px=int(meta["z_offset_px"]),
    )
    return Pullback(pixels=pixels, calibration=cal, id=str(meta["id"]))


def save_pullback(pullback: Pullback, path: str | Path) -> Path:
    """Write a pullback container; round-trip with `load_pullback` is byte-identical."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": FORMAT_VERSION,
        "id": pullback.id,
        "n_frames": pullback.n_frames,
        "n_alines": pullback.n_alines,
        "n_r": pullback.n_r,
        "r_pixel_um": pullback.calibration.r_pixel_um,
        "frame_spacing_mm": pullback.calibration.frame_spacing_mm,
        "z_offset_px": pullback.calibration.z_offset_px,
    }
    (path / META_NAME).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    pullback.pixels.astype("<u2").tofile(path / FRAMES_NAME)
    return path


def load_labels(path: str | Path, pullback: Pullback, name: str = LABELS_NAME) -> np.ndarray:
    labels_path = Path(path) / name
    if not labels_path.is_file():
        raise FormatError(f"missing {name} in {path}")
    shape = (pullback.n_frames, pullback.n_alines, pullback.n_r)
    labels = _read_raw(labels_path, np.dtype("u1"), shape)
    if labels.max(initial=0) > 5:
        bad = int(np.argmax(labels.ravel() > 5))
        raise FormatError(f"label code out of range in {name}", offset=bad)
    return labels


def save_labels(labels: np.ndarray, path: str | Path, name: str = LABELS_NAME) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    labels.astype("u1").tofile(path / name)
    return path / name


def load_probs(path: str | Path, pullback: Pullback) -> np.ndarray:
    probs_path = Path(path) / PROBS_NAME
    if not probs_path.is_file():
        raise FormatError(f"missing {PROBS_NAME} in {path}")
    shape = (pullback.n_frames, pullback.n_alines, pullback.n_r)
    probs = _read_raw(probs_path, np.dtype("<f4"), shape)
    if not np.isfinite(probs).all():
        raise FormatError(f"non-finite value in {PROBS_NAME}")
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise FormatError(f"{PROBS_NAME} values must lie in [0, 1]")
    return probs


def save_probs(probs: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    probs.astype("<f4").tofile(path / PROBS_NAME)
    return path / PROBS_NAME
