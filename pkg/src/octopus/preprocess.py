"""Guidewire removal, lumen segmentation, pixel-shifting, and filtering.

The guidewire shadow is located on an accumulated intensity map by two
dynamic-programming paths over the frame axis (one per shadow edge); the
lumen boundary is a per-frame dynamic program over A-lines maximizing the
outward dark-to-bright gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter as _nd_gaussian

from .dp import best_cyclic_path, viterbi_chain
from .errors import NoShadowFound, SegmentationFailed
from .model import LABEL_GUIDEWIRE, Contour, Pullback, crop_depth
from .quant import interpolate_circular


@dataclass(frozen=True)
class IntensityMap:
    """Per-(frame, A-line) normalized accumulated intensity, values in [0, 1].

    `raw` keeps the unnormalized A-line sums; band-darkness validation needs
    absolute levels that min-max normalization erases.
    """

    values: np.ndarray  # (n_frames, n_alines) float64
    raw: np.ndarray | None = None

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_alines(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GuidewireBand:
    """Per-frame angular interval [lower, upper] of guidewire A-lines (wraps)."""

    lower: np.ndarray  # (n_frames,) int
    upper: np.ndarray
    edge_contrast: float = 0.0

    def aline_mask(self, n_alines: int) -> np.ndarray:
        """Boolean (n_frames, n_alines) mask of banded A-lines."""
        n_frames = self.lower.shape[0]
        idx = np.arange(n_alines)[None, :]
        width = np.mod(self.upper - self.lower, n_alines)[:, None]
        rel = np.mod(idx - self.lower[:, None], n_alines)
        return rel <= width

    def width(self, n_alines: int) -> np.ndarray:
        return np.mod(self.upper - self.lower, n_alines) + 1


def accumulate_intensity(pullback: Pullback) -> IntensityMap:
    """Sum each A-line and min-max normalize per frame (0/0 guarded to 0)."""
    sums = pullback.pixels.astype(np.float64).sum(axis=2)
    lo = sums.min(axis=1, keepdims=True)
    hi = sums.max(axis=1, keepdims=True)
    span = hi - lo
    # frames with (near-)constant rows normalize to zero, not amplified noise
    ok = span > 1e-6 * np.maximum(hi, 1e-12)
    normed = np.where(ok, (sums - lo) / np.where(ok, span, 1.0), 0.0)
    return IntensityMap(values=normed, raw=sums)


def _windowed_means(values: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Circular before/after window means along the A-line axis."""
    n = values.shape[1]
    idx = np.arange(n)
    before = np.zeros_like(values)
    after = np.zeros_like(values)
    for k in range(1, window + 1):
        before += values[:, (idx - k) % n]
        after += values[:, (idx + k) % n]
    return before / window, after / window


def detect_guidewire(
    imap: IntensityMap,
    *,
    jump: int = 3,
    window: int = 5,
    floor: float = 0.35,
    darkness_max: float = 0.35,
) -> GuidewireBand:
    """Track the two shadow edges across frames by dynamic programming.

    The lower edge maximizes the bright-to-dark drop entering the shadow, the
    upper edge the dark-to-bright rise leaving it; both paths move at most
    `jump` A-lines per frame (circular angular axis). Raises `NoShadowFound`
    when the mean across-edge contrast of the best paths is below `floor`, or
    when the band interior is not truly dark in absolute terms (a wide
    calcification also darkens its A-lines, but far less than the metal
    guidewire whose shadow blanks them).
    """
    values = imap.values
    before, after = _windowed_means(values, window)
    drop = before - (values + after) / 2.0   # bright before, dark at/after: lower edge
    rise = after - (values + before) / 2.0   # dark before/at, bright after: upper edge
    lower_path, lower_total = viterbi_chain(drop, jump, circular_states=True)
    upper_path, upper_total = viterbi_chain(rise, jump, circular_states=True)
    contrast = (lower_total + upper_total) / (2.0 * imap.n_frames)
    if contrast < floor:
        raise NoShadowFound(f"edge contrast {contrast:.3f} below floor {floor:.3f}")
    band = GuidewireBand(lower=lower_path, upper=upper_path,
                         edge_contrast=float(contrast))
    if imap.raw is not None:
        darkness = _band_darkness(imap.raw, band)
        if darkness > darkness_max:
            raise NoShadowFound(
                f"band interior at {darkness:.2f} of tissue level "
                f"(max {darkness_max:.2f}); not a guidewire shadow")
    return band


def _band_darkness(raw: np.ndarray, band: GuidewireBand) -> float:
    """Mean in-band raw A-line sum relative to the out-of-band median."""
    n_alines = raw.shape[1]
    mask = band.aline_mask(n_alines)
    ratios = []
    for f in range(raw.shape[0]):
        outside = np.median(raw[f][~mask[f]]) if (~mask[f]).any() else 0.0
        if outside <= 0:
            continue
        ratios.append(float(raw[f][mask[f]].mean()) / outside)
    return float(np.mean(ratios)) if ratios else 0.0


def mask_guidewire(labels: np.ndarray, band: GuidewireBand | None) -> np.ndarray:
    """Set every pixel on banded A-lines to the guidewire class."""
    if band is None:
        return labels
    out = labels.copy()
    mask = band.aline_mask(labels.shape[1])
    out[mask, :] = LABEL_GUIDEWIRE
    return out


def _gradient_score(frame: np.ndarray, sigma: float, baseline: int) -> np.ndarray:
    """Outward dark-to-bright gradient, normalized by the frame's brightness."""
    smooth = _nd_gaussian(frame.astype(np.float32), sigma=sigma, mode="nearest")
    half = baseline // 2
    score = np.zeros_like(smooth)
    score[:, half:-half or None] = smooth[:, 2 * half:] - smooth[:, : smooth.shape[1] - 2 * half]
    peak = float(smooth.max())
    if peak > 0:
        score /= peak
    return score


def segment_lumen_frame(
    frame: np.ndarray,
    band_mask: np.ndarray | None,
    *,
    jump: int = 4,
    sigma: float = 2.0,
    baseline: int = 5,
    r_min: int = 12,
    min_score: float = 0.02,
) -> Contour:
    """Lumen boundary of one polar frame.

    Guidewire A-lines (`band_mask`) are excluded from the path and filled by
    circular linear interpolation afterward. Raises `SegmentationFailed` if
    the best path's mean gradient is below `min_score`.
    """
    n_alines, n_r = frame.shape
    score = _gradient_score(frame, sigma, baseline)
    score[:, :r_min] = -1e3  # keep the path off the catheter zone
    if band_mask is not None and band_mask.any():
        keep = ~band_mask
        if not keep.any():
            raise SegmentationFailed("all A-lines are guidewire")
        # solve on the open chain that starts right after the band
        start = int(np.argmax(np.diff(np.concatenate([band_mask[-1:], band_mask])
                                      .astype(int)) < 0))
        order = [(start + k) % n_alines for k in range(n_alines)]
        chain = [i for i in order if keep[i]]
        path, total = viterbi_chain(score[chain], jump)
        if total / len(chain) < min_score:
            raise SegmentationFailed(f"best path score {total / len(chain):.4f} too low")
        radii = np.full(n_alines, np.nan)
        radii[np.asarray(chain)] = path
        radii = interpolate_circular(radii)
    else:
        path, total = best_cyclic_path(score, jump)
        if total / n_alines < min_score:
            raise SegmentationFailed(f"best path score {total / n_alines:.4f} too low")
        radii = path.astype(np.float64)
    return Contour(radii=radii)


def segment_lumen_dp(
    pullback: Pullback,
    band: GuidewireBand | None,
    *,
    jump: int = 4,
    sigma: float = 2.0,
    baseline: int = 5,
    r_min: int = 12,
    min_score: float = 0.02,
) -> tuple[list[Contour | None], list[int]]:
    """Per-frame lumen contours; failed frame indices are returned separately."""
    band_masks = band.aline_mask(pullback.n_alines) if band is not None else None
    contours: list[Contour | None] = []
    failed: list[int] = []
    for f in range(pullback.n_frames):
        mask = band_masks[f] if band_masks is not None else None
        try:
            contours.append(segment_lumen_frame(
                pullback.pixels[f], mask, jump=jump, sigma=sigma,
                baseline=baseline, r_min=r_min, min_score=min_score))
        except SegmentationFailed:
            contours.append(None)
            failed.append(f)
    return contours, failed


def lumen_mask_from_contour(contour: Contour, n_r: int) -> np.ndarray:
    """Boolean (n_alines, n_r) mask of the lumen interior."""
    cols = np.arange(n_r)[None, :]
    return cols < contour.radii[:, None]


def pixel_shift(
    pullback: Pullback, contours: list[Contour | None]
) -> tuple[np.ndarray, np.ndarray]:
    """Shift every A-line left so the lumen border lands at column 0.

    Returns the shifted volume and the integer per-(frame, A-line) shift
    record needed to map results back to original coordinates exactly.
    """
    F, A, R = pullback.pixels.shape
    shifts = np.zeros((F, A), dtype=np.int32)
    shifted = np.zeros_like(pullback.pixels)
    cols = np.arange(R)
    rows = np.arange(A)[:, None]
    for f in range(F):
        c = contours[f]
        if c is None:
            continue
        s = np.clip(np.round(c.radii).astype(np.int32), 0, R - 1)
        shifts[f] = s
        src = cols[None, :] + s[:, None]
        valid = src < R
        gathered = pullback.pixels[f][rows, np.minimum(src, R - 1)]
        shifted[f] = np.where(valid, gathered, 0)
    return shifted, shifts


def unshift_mask(mask_patch: np.ndarray, shifts_frame: np.ndarray, n_r: int) -> np.ndarray:
    """Map a shifted-domain (A, depth) mask back to original (A, n_r) coordinates."""
    A, depth = mask_patch.shape
    out = np.zeros((A, n_r), dtype=mask_patch.dtype)
    for a in range(A):
        s = int(shifts_frame[a])
        width = min(depth, n_r - s)
        if width > 0:
            out[a, s:s + width] = mask_patch[a, :width]
    return out


def gaussian_filter(patch: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur; sigma=0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return patch.astype(np.float32, copy=True)
    return _nd_gaussian(patch.astype(np.float32), sigma=sigma, mode="nearest")


def shifted_patches(
    pullback: Pullback,
    contours: list[Contour | None],
    *,
    depth_px: int = 300,
    sigma: float = 2.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-shift, crop to the analysis depth, and Gaussian-filter all frames.

    Returns (patches float32 (F, A, depth_px), shift record (F, A) int32).
    """
    shifted, shifts = pixel_shift(pullback, contours)
    F, A, _ = shifted.shape
    patches = np.empty((F, A, depth_px), dtype=np.float32)
    for f in range(F):
        patches[f] = gaussian_filter(crop_depth(shifted[f], depth_px), sigma)
    return patches, shifts
