"""Pullback data model, calibration, and polar/cartesian geometry.

Frames live in the polar (r, theta) domain: row i is the A-line at angle
theta_i = i * (360 / n_alines) degrees, columns are radial samples of
`r_pixel_um` micrometers each. All types are immutable values; pixel arrays
are treated as read-only after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import OffsetOutOfRange

# Label class codes used throughout the package.
LABEL_BACKGROUND = 0
LABEL_LUMEN = 1
LABEL_CALCIUM = 2
LABEL_LIPID = 3
LABEL_OTHER = 4
LABEL_GUIDEWIRE = 5

LABEL_NAMES = {
    LABEL_BACKGROUND: "background",
    LABEL_LUMEN: "lumen",
    LABEL_CALCIUM: "calcium",
    LABEL_LIPID: "lipid",
    LABEL_OTHER: "other",
    LABEL_GUIDEWIRE: "guidewire",
}

# Overlay palette (RGB): lumen yellow, calcium red, lipid green.
LABEL_COLORS = {
    LABEL_LUMEN: (255, 255, 0),
    LABEL_CALCIUM: (255, 0, 0),
    LABEL_LIPID: (0, 200, 0),
    LABEL_OTHER: (0, 128, 255),
    LABEL_GUIDEWIRE: (128, 128, 128),
}

ANALYSIS_DEPTH_PX = 300  # 1.5 mm at 5 um/px, the usable penetration depth


@dataclass(frozen=True)
class Calibration:
    """Physical calibration of a pullback.

    `z_offset_px` records the cumulative radial shift already applied to the
    pixel grid by manual Z-offset calibration; measurements read radial
    indices directly and must not re-apply it.
    """

    r_pixel_um: float = 5.0
    frame_spacing_mm: float = 0.2
    z_offset_px: int = 0

    def __post_init__(self):
        if not self.r_pixel_um > 0:
            raise ValueError("r_pixel_um must be positive")
        if not self.frame_spacing_mm > 0:
            raise ValueError("frame_spacing_mm must be positive")

    @property
    def r_pixel_mm(self) -> float:
        return self.r_pixel_um / 1000.0


@dataclass(frozen=True)
class PolarFrame:
    """One polar-domain frame: (n_alines, n_r) grid of 16-bit intensities."""

    pixels: np.ndarray
    index: int

    def __post_init__(self):
        if self.pixels.ndim != 2:
            raise ValueError("frame pixels must be 2-D (n_alines, n_r)")
        if self.pixels.shape[0] < 8 or self.pixels.shape[1] < ANALYSIS_DEPTH_PX:
            raise ValueError(
                f"frame too small: {self.pixels.shape}, need >= 8 A-lines "
                f"and >= {ANALYSIS_DEPTH_PX} radial samples"
            )

    @property
    def n_alines(self) -> int:
        return self.pixels.shape[0]

    @property
    def n_r(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Pullback:
    """Ordered stack of polar frames sharing one calibration.

    Pixels are stored as a single (n_frames, n_alines, n_r) uint16 array;
    `frame(i)` exposes individual `PolarFrame` views.
    """

    pixels: np.ndarray
    calibration: Calibration
    id: str = ""

    def __post_init__(self):
        if self.pixels.ndim != 3:
            raise ValueError("pullback pixels must be 3-D (n_frames, n_alines, n_r)")
        if self.pixels.dtype != np.uint16:
            raise ValueError("pullback pixels must be uint16")
        if abs(self.calibration.z_offset_px) >= self.n_r:
            raise ValueError("|z_offset_px| must be smaller than n_r")

    @property
    def n_frames(self) -> int:
        return self.pixels.shape[0]

    @property
    def n_alines(self) -> int:
        return self.pixels.shape[1]

    @property
    def n_r(self) -> int:
        return self.pixels.shape[2]

    def frame(self, i: int) -> PolarFrame:
        return PolarFrame(self.pixels[i], i)

    @property
    def frames(self) -> list[PolarFrame]:
        return [self.frame(i) for i in range(self.n_frames)]

    def aline_angles_deg(self) -> np.ndarray:
        return np.arange(self.n_alines) * (360.0 / self.n_alines)


@dataclass(frozen=True)
class Contour:
    """Per-A-line radial boundary index (one value per polar row)."""

    radii: np.ndarray  # float, shape (n_alines,)
    closed: bool = True

    def __post_init__(self):
        if self.radii.ndim != 1:
            raise ValueError("contour radii must be 1-D")

    @property
    def n_alines(self) -> int:
        return self.radii.shape[0]


def validate_labels(labels: np.ndarray, pullback: Pullback) -> None:
    """Raise if a label volume does not align with its pullback."""
    if labels.shape != pullback.pixels.shape:
        raise ValueError(
            f"label shape {labels.shape} != pullback shape {pullback.pixels.shape}"
        )
    if labels.dtype != np.uint8:
        raise ValueError("labels must be uint8")
    if labels.max(initial=0) > LABEL_GUIDEWIRE:
        raise ValueError("label codes must be in 0..5")


def _cartesian_sample_coords(out_size: int, n_alines: int) -> tuple[np.ndarray, np.ndarray]:
    """Polar (aline, r) sampling coordinates for a square cartesian grid."""
    center = (out_size - 1) / 2.0
    ys, xs = np.mgrid[0:out_size, 0:out_size]
    dx = xs - center
    dy = ys - center
    r = np.hypot(dx, dy)
    theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
    aline = theta * (n_alines / (2.0 * np.pi))
    return aline, r


def polar_to_cartesian(
    frame: PolarFrame | np.ndarray,
    cal: Calibration,
    out_size: int,
    *,
    is_labels: bool = False,
) -> np.ndarray:
    """Resample a polar frame onto a square cartesian grid.

    One output pixel equals one radial pixel (`cal.r_pixel_um`); the polar
    origin maps to the image center. Intensities are sampled bilinearly,
    labels nearest-neighbor to stay categorical. Pixels beyond the maximum
    radius are zero.
    """
    if out_size < 2:
        raise ValueError("out_size must be >= 2")
    pixels = frame.pixels if isinstance(frame, PolarFrame) else frame
    n_alines, n_r = pixels.shape
    aline, r = _cartesian_sample_coords(out_size, n_alines)
    order = 0 if is_labels else 1
    src = pixels if is_labels else pixels.astype(np.float32)
    out = map_coordinates(
        src, [aline, r], order=order, mode="grid-wrap", cval=0.0, prefilter=False
    )
    # grid-wrap also wraps the radial axis; mask beyond the outer edge by hand
    out[r > n_r - 1] = 0
    if is_labels:
        return out.astype(pixels.dtype)
    return np.clip(out, 0, np.iinfo(np.uint16).max).astype(np.uint16)


def cartesian_to_polar(
    image: np.ndarray,
    cal: Calibration,
    n_alines: int,
    n_r: int,
    *,
    is_labels: bool = False,
) -> np.ndarray:
    """Inverse of `polar_to_cartesian` on the same 1 px = 1 radial px grid."""
    out_size = image.shape[0]
    center = (out_size - 1) / 2.0
    theta = (np.arange(n_alines) * (2.0 * np.pi / n_alines))[:, None]
    r = np.arange(n_r)[None, :]
    xs = center + r * np.cos(theta)
    ys = center + r * np.sin(theta)
    order = 0 if is_labels else 1
    src = image if is_labels else image.astype(np.float32)
    out = map_coordinates(src, [ys, xs], order=order, mode="constant", cval=0.0,
                          prefilter=False)
    if is_labels:
        return out.astype(image.dtype)
    return np.clip(out, 0, np.iinfo(np.uint16).max).astype(np.uint16)


def apply_z_offset(pullback: Pullback, delta_px: int) -> Pullback:
    """Shift every A-line radially by `delta_px`, zero-filling vacated pixels.

    Positive deltas push samples outward (toward larger radius). The shift is
    accumulated into `calibration.z_offset_px` as bookkeeping of the total
    correction baked into the pixel grid.
    """
    delta_px = int(delta_px)
    if abs(delta_px) >= pullback.n_r:
        raise OffsetOutOfRange(
            f"|delta_px|={abs(delta_px)} must be < n_r={pullback.n_r}"
        )
    if delta_px == 0:
        return pullback
    shifted = np.zeros_like(pullback.pixels)
    if delta_px > 0:
        shifted[:, :, delta_px:] = pullback.pixels[:, :, :-delta_px]
    else:
        shifted[:, :, :delta_px] = pullback.pixels[:, :, -delta_px:]
    cal = replace(
        pullback.calibration,
        z_offset_px=pullback.calibration.z_offset_px + delta_px,
    )
    return Pullback(pixels=shifted, calibration=cal, id=pullback.id)


def crop_depth(shifted_frame: np.ndarray, depth_px: int = ANALYSIS_DEPTH_PX) -> np.ndarray:
    """Keep the first `depth_px` radial columns of a pixel-shifted frame.

    Input must already have the lumen border at column 0. Shorter A-lines are
    zero-padded so the output always has exactly `depth_px` columns.
    """
    n_alines, n_r = shifted_frame.shape
    if n_r >= depth_px:
        return shifted_frame[:, :depth_px].copy()
    out = np.zeros((n_alines, depth_px), dtype=shifted_frame.dtype)
    out[:, :n_r] = shifted_frame
    return out
