"""Serial pullback co-registration at frame granularity.

Automatic mode cross-correlates the per-frame maximum calcification
thickness curves of the two pullbacks; landmark mode averages two
user-marked frame correspondences. The offset convention throughout:
`frame_float = frame_ref + offset`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSignal, InvalidLandmarks
from .model import LABEL_CALCIUM, Calibration
from .quant import _max_run_per_row

MIN_OVERLAP = 25


@dataclass(frozen=True)
class ThicknessSignal:
    """Per-frame maximum calcification thickness in mm."""

    values: np.ndarray
    pullback_id: str = ""

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


@dataclass
class RegistrationResult:
    offset_frames: int
    peak_correlation: float
    mode: str  # "automatic" | "landmark"
    warning: str | None = None

    def ref_to_float(self, frame_ref: int) -> int:
        return frame_ref + self.offset_frames

    def float_to_ref(self, frame_float: int) -> int:
        return frame_float - self.offset_frames

    def to_dict(self) -> dict:
        return {
            "offset_frames": self.offset_frames,
            "peak_correlation": self.peak_correlation,
            "mode": self.mode,
            "warning": self.warning,
        }


def thickness_signal(labels: np.ndarray, cal: Calibration, pullback_id: str = "") -> ThicknessSignal:
    """Max contiguous radial calcium extent per frame, calibrated to mm."""
    n_frames = labels.shape[0]
    values = np.zeros(n_frames)
    for f in range(n_frames):
        mask = labels[f] == LABEL_CALCIUM
        if mask.any():
            values[f] = _max_run_per_row(mask).max() * cal.r_pixel_mm
    return ThicknessSignal(values=values, pullback_id=pullback_id)


def register_auto(
    ref: ThicknessSignal,
    float_sig: ThicknessSignal,
    max_offset: int | None = None,
    *,
    min_overlap: int = MIN_OVERLAP,
) -> RegistrationResult:
    """Normalized cross-correlation over candidate frame offsets.

    Correlation is computed on the mean-subtracted overlap window for every
    offset; ties break toward the smaller |offset|. Raises `DegenerateSignal`
    when either curve has zero variance.
    """
    a = np.asarray(ref.values, dtype=np.float64)
    b = np.asarray(float_sig.values, dtype=np.float64)
    if a.std() == 0.0 or b.std() == 0.0:
        raise DegenerateSignal("thickness signal has zero variance")
    if max_offset is None:
        max_offset = min(a.size, b.size) // 2
    best_offset, best_corr = 0, -2.0
    for k in sorted(range(-max_offset, max_offset + 1), key=lambda x: (abs(x), x)):
        # float frame f matches ref frame f - k
        lo_f = max(0, k)
        hi_f = min(b.size, a.size + k)
        if hi_f - lo_f < min_overlap:
            continue
        seg_b = b[lo_f:hi_f]
        seg_a = a[lo_f - k:hi_f - k]
        sa = seg_a - seg_a.mean()
        sb = seg_b - seg_b.mean()
        denom = math.sqrt(float(np.dot(sa, sa)) * float(np.dot(sb, sb)))
        if denom == 0.0:
            continue
        corr = float(np.dot(sa, sb)) / denom
        if corr > best_corr + 1e-12:
            best_offset, best_corr = k, corr
    if best_corr <= -2.0:
        raise DegenerateSignal("no offset with sufficient overlap")
    return RegistrationResult(offset_frames=best_offset,
                              peak_correlation=best_corr, mode="automatic")


def register_landmark(
    ref_frames: tuple[int, int], float_frames: tuple[int, int]
) -> RegistrationResult:
    """Offset from two landmark correspondences (mean, rounded half away from zero)."""
    r1, r2 = ref_frames
    f1, f2 = float_frames
    if (r2 - r1) * (f2 - f1) <= 0:
        raise InvalidLandmarks("landmark order crosses between pullbacks")
    o1 = f1 - r1
    o2 = f2 - r2
    mean = (o1 + o2) / 2.0
    offset = int(math.floor(mean + 0.5)) if mean >= 0 else int(math.ceil(mean - 0.5))
    warning = None
    if o1 != o2:
        warning = f"landmark offsets differ by {abs(o1 - o2)} frame(s)"
        if abs(o1 - o2) > 2:
            warning += "; non-rigid mismatch between pullbacks"
    return RegistrationResult(offset_frames=offset, peak_correlation=0.0,
                              mode="landmark", warning=warning)


@dataclass
class FrameMapping:
    """Reindexing of a floating pullback onto the reference frame axis."""

    offset_frames: int
    n_ref: int
    n_float: int
    float_index: np.ndarray = field(init=False)  # per ref frame; -1 when absent
    valid: np.ndarray = field(init=False)

    def __post_init__(self):
        idx = np.arange(self.n_ref) + self.offset_frames
        self.valid = (idx >= 0) & (idx < self.n_float)
        self.float_index = np.where(self.valid, idx, -1)


def apply_registration(
    result: RegistrationResult, n_ref: int, volume: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Reindex a floating per-frame array onto the reference axis (no resampling).

    Returns (reindexed array, validity mask); out-of-range frames hold zeros.
    """
    mapping = FrameMapping(result.offset_frames, n_ref, volume.shape[0])
    out_shape = (n_ref,) + volume.shape[1:]
    out = np.zeros(out_shape, dtype=volume.dtype)
    out[mapping.valid] = volume[mapping.float_index[mapping.valid]]
    return out, mapping.valid
