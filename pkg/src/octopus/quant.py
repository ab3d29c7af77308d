"""Lumen and calcification attribute measurement, scoring, and map views.

Angles are counted as A-lines about the catheter center (the polar ray
structure); radial quantities are calibrated through `Calibration`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    LABEL_CALCIUM,
    LABEL_LUMEN,
    Calibration,
    Contour,
    Pullback,
)


@dataclass
class FrameQuant:
    """Per-frame lumen and calcium attributes."""

    frame: int
    lumen_area_mm2: float
    diam_max_mm: float
    diam_min_mm: float
    diam_mean_mm: float
    calc_angle_deg: float
    calc_max_thickness_mm: float  # nan when the frame has no calcium
    calc_min_depth_mm: float      # nan when the frame has no calcium
    gated: bool = False
    flags: tuple[str, ...] = ()


@dataclass
class LesionQuant:
    """Attributes of one maximal run of gated calcium frames."""

    frame_start: int
    frame_end: int  # inclusive
    length_mm: float
    max_angle_deg: float
    max_thickness_mm: float
    min_depth_mm: float
    score: int = 0

    @property
    def n_frames(self) -> int:
        return self.frame_end - self.frame_start + 1


@dataclass
class EnFaceMaps:
    """Unrolled-vessel maps: (n_frames, angular_bins) grids."""

    presence: np.ndarray   # bool
    thickness_mm: np.ndarray  # nan where absent
    depth_mm: np.ndarray      # nan where absent
    angular_bins: int = field(default=0)

    def __post_init__(self):
        self.angular_bins = self.presence.shape[1]


def contour_points_mm(contour: Contour, cal: Calibration) -> np.ndarray:
    """Boundary polygon vertices (x, y) in millimeters about the catheter."""
    n = contour.n_alines
    theta = np.arange(n) * (2.0 * np.pi / n)
    r_mm = contour.radii * cal.r_pixel_mm
    return np.stack([r_mm * np.cos(theta), r_mm * np.sin(theta)], axis=1)


def _shoelace_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * y2 - x2 * y))


def _polygon_centroid(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    cross = x * y2 - x2 * y
    area = 0.5 * np.sum(cross)
    if abs(area) < 1e-12:
        return points.mean(axis=0)
    cx = np.sum((x + x2) * cross) / (6.0 * area)
    cy = np.sum((y + y2) * cross) / (6.0 * area)
    return np.array([cx, cy])


def _star_radius(points: np.ndarray, centroid: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Boundary radius about `centroid` at the query angles (periodic interp)."""
    rel = points - centroid
    phi = np.arctan2(rel[:, 1], rel[:, 0])
    rad = np.hypot(rel[:, 0], rel[:, 1])
    order = np.argsort(phi)
    phi, rad = phi[order], rad[order]
    # pad one period on both sides for wraparound interpolation
    phi_ext = np.concatenate([phi - 2 * np.pi, phi, phi + 2 * np.pi])
    rad_ext = np.concatenate([rad, rad, rad])
    q = np.mod(query + np.pi, 2 * np.pi) - np.pi
    return np.interp(q, phi_ext, rad_ext)


def lumen_quant(contour: Contour, cal: Calibration) -> dict[str, float]:
    """Area (shoelace) and max/min/mean centroid-chord diameters in mm."""
    pts = contour_points_mm(contour, cal)
    area = abs(_shoelace_area(pts))
    centroid = _polygon_centroid(pts)
    n = contour.n_alines
    half = np.arange(n // 2) * (2.0 * np.pi / n)
    chords = _star_radius(pts, centroid, half) + _star_radius(pts, centroid, half + np.pi)
    return {
        "lumen_area_mm2": area,
        "diam_max_mm": float(chords.max()),
        "diam_min_mm": float(chords.min()),
        "diam_mean_mm": float(chords.mean()),
    }


def _max_run_per_row(mask: np.ndarray) -> np.ndarray:
    """Longest run of True per row, vectorized."""
    x = mask.astype(np.int64)
    cs = np.cumsum(x, axis=1)
    reset = np.where(x == 0, cs, 0)
    run = cs - np.maximum.accumulate(reset, axis=1)
    return run.max(axis=1)


def _max_circular_run(flags: np.ndarray) -> int:
    """Longest circular run of True in a 1-D boolean array."""
    n = flags.size
    if flags.all():
        return n
    if not flags.any():
        return 0
    doubled = np.concatenate([flags, flags]).astype(np.int64)
    cs = np.cumsum(doubled)
    reset = np.where(doubled == 0, cs, 0)
    run = cs - np.maximum.accumulate(reset)
    return int(min(run.max(), n))


def calcium_aline_stats(labels_frame: np.ndarray, contour: Contour) -> dict[str, np.ndarray]:
    """Per-A-line calcium presence, max contiguous thickness (px), depth (px)."""
    mask = labels_frame == LABEL_CALCIUM
    has = mask.any(axis=1)
    thickness_px = _max_run_per_row(mask).astype(np.float64)
    thickness_px[~has] = np.nan
    inner = np.argmax(mask, axis=1).astype(np.float64)
    depth_px = inner - contour.radii
    depth_px = np.maximum(depth_px, 0.0)
    depth_px[~has] = np.nan
    return {"has": has, "thickness_px": thickness_px, "depth_px": depth_px}


def calcium_quant(labels_frame: np.ndarray, contour: Contour, cal: Calibration) -> dict[str, float]:
    """Max arc angle, max thickness, min depth of calcium on one frame.

    Single-A-line gaps inside an arc are closed before angle counting; larger
    gaps split the arc and the widest arc is reported.
    """
    stats = calcium_aline_stats(labels_frame, contour)
    has = stats["has"]
    n = has.size
    if not has.any():
        return {"calc_angle_deg": 0.0, "calc_max_thickness_mm": math.nan,
                "calc_min_depth_mm": math.nan}
    closed = has | (np.roll(has, 1) & np.roll(has, -1))
    angle = _max_circular_run(closed) * (360.0 / n)
    mm = cal.r_pixel_mm
    return {
        "calc_angle_deg": float(angle),
        "calc_max_thickness_mm": float(np.nanmax(stats["thickness_px"]) * mm),
        "calc_min_depth_mm": float(np.nanmin(stats["depth_px"]) * mm),
    }


def frame_quant(
    index: int,
    labels_frame: np.ndarray,
    contour: Contour,
    cal: Calibration,
    *,
    gated: bool = False,
    flags: tuple[str, ...] = (),
) -> FrameQuant:
    lum = lumen_quant(contour, cal)
    calc = calcium_quant(labels_frame, contour, cal)
    return FrameQuant(frame=index, gated=gated, flags=flags, **lum, **calc)


def lesion_quant(
    quants: list[FrameQuant],
    gated: np.ndarray,
    cal: Calibration,
    *,
    angle_thr_deg: float = 180.0,
    length_thr_mm: float = 5.0,
    thickness_thr_mm: float = 0.5,
) -> list[LesionQuant]:
    """Group maximal gated runs into lesions with extremal attributes and score."""
    by_frame = {q.frame: q for q in quants}
    frames = np.array(sorted(by_frame))
    lesions: list[LesionQuant] = []
    run_start = None
    gated = np.asarray(gated, dtype=bool)
    for pos, f in enumerate(frames):
        if gated[pos] and run_start is None:
            run_start = f
        end_of_run = run_start is not None and (
            not gated[pos] or pos == len(frames) - 1
        )
        if end_of_run:
            run_end = f if gated[pos] else frames[pos - 1]
            runs = [by_frame[g] for g in range(run_start, run_end + 1) if g in by_frame]
            angles = [q.calc_angle_deg for q in runs]
            thicks = [q.calc_max_thickness_mm for q in runs
                      if not math.isnan(q.calc_max_thickness_mm)]
            depths = [q.calc_min_depth_mm for q in runs
                      if not math.isnan(q.calc_min_depth_mm)]
            lesion = LesionQuant(
                frame_start=int(run_start),
                frame_end=int(run_end),
                length_mm=len(runs) * cal.frame_spacing_mm,
                max_angle_deg=max(angles) if angles else 0.0,
                max_thickness_mm=max(thicks) if thicks else math.nan,
                min_depth_mm=min(depths) if depths else math.nan,
            )
            lesion.score = calcium_score(
                lesion, angle_thr_deg=angle_thr_deg,
                length_thr_mm=length_thr_mm, thickness_thr_mm=thickness_thr_mm,
            )
            lesions.append(lesion)
            run_start = None
    return lesions


def calcium_score(
    lesion: LesionQuant,
    *,
    angle_thr_deg: float = 180.0,
    length_thr_mm: float = 5.0,
    thickness_thr_mm: float = 0.5,
) -> int:
    """0-4 point stent-underexpansion risk score for one lesion."""
    score = 0
    if lesion.max_angle_deg > angle_thr_deg:
        score += 2
    if lesion.length_mm > length_thr_mm:
        score += 1
    if not math.isnan(lesion.max_thickness_mm) and lesion.max_thickness_mm > thickness_thr_mm:
        score += 1
    return score


def enface_maps(
    labels: np.ndarray,
    contours: list[Contour],
    cal: Calibration,
    angular_bins: int,
) -> EnFaceMaps:
    """Presence/thickness/depth maps over (frame, angular bin)."""
    n_frames, n_alines, _ = labels.shape
    bins = np.arange(n_alines) * angular_bins // n_alines
    presence = np.zeros((n_frames, angular_bins), dtype=bool)
    thickness = np.full((n_frames, angular_bins), np.nan)
    depth = np.full((n_frames, angular_bins), np.nan)
    for f in range(n_frames):
        stats = calcium_aline_stats(labels[f], contours[f])
        has = stats["has"]
        if not has.any():
            continue
        t_mm = stats["thickness_px"] * cal.r_pixel_mm
        d_mm = stats["depth_px"] * cal.r_pixel_mm
        for b in range(angular_bins):
            sel = has & (bins == b)
            if sel.any():
                presence[f, b] = True
                thickness[f, b] = np.nanmax(t_mm[sel])
                depth[f, b] = np.nanmin(d_mm[sel])
    return EnFaceMaps(presence=presence, thickness_mm=thickness, depth_mm=depth)


def longitudinal_view(
    pullback: Pullback, labels: np.ndarray | None, angle_deg: float
) -> tuple[np.ndarray, np.ndarray | None]:
    """Cut-plane image through the pullback at a projection angle.

    Each output row stacks the A-line nearest `angle_deg + 180` (reversed,
    catheter in the middle) with the A-line nearest `angle_deg`. Returns the
    image and, when labels are given, a matching label strip.
    """
    n = pullback.n_alines
    step = 360.0 / n
    i1 = int(round(angle_deg / step)) % n
    i2 = int(round((angle_deg + 180.0) / step)) % n
    img = np.concatenate(
        [pullback.pixels[:, i2, ::-1], pullback.pixels[:, i1, :]], axis=1
    )
    strip = None
    if labels is not None:
        strip = np.concatenate([labels[:, i2, ::-1], labels[:, i1, :]], axis=1)
    return img, strip


def measure_angle_deg(p1, p2, vertex) -> float:
    """Angle swept counterclockwise from ray vertex->p1 to ray vertex->p2."""
    a1 = math.atan2(p1[1] - vertex[1], p1[0] - vertex[0])
    a2 = math.atan2(p2[1] - vertex[1], p2[0] - vertex[0])
    return math.degrees((a2 - a1) % (2.0 * math.pi))


def measure_length_mm(p1, p2, cal: Calibration) -> float:
    """Euclidean distance between two cross-sectional points in mm."""
    d_px = math.hypot(p2[0] - p1[0], p2[1] - p1[1])
    return d_px * cal.r_pixel_mm


def measure_span_mm(frame_a: int, frame_b: int, cal: Calibration) -> float:
    """Longitudinal distance between two frames in mm."""
    return abs(frame_b - frame_a) * cal.frame_spacing_mm


def contour_from_labels(labels_frame: np.ndarray) -> Contour:
    """Lumen boundary implied by the lumen class of a label frame.

    Boundary = one past the outermost lumen pixel per A-line; A-lines with no
    lumen label (e.g. guidewire) are filled by circular linear interpolation.
    """
    lum = labels_frame == LABEL_LUMEN
    n_alines, n_r = labels_frame.shape
    has = lum.any(axis=1)
    radii = np.full(n_alines, np.nan)
    if has.any():
        last = n_r - 1 - np.argmax(lum[:, ::-1], axis=1)
        radii[has] = last[has] + 1.0
        radii = interpolate_circular(radii)
    else:
        radii[:] = 0.0
    return Contour(radii=radii)


def interpolate_circular(values: np.ndarray) -> np.ndarray:
    """Fill nan entries of a periodic sequence by linear interpolation."""
    out = values.astype(np.float64).copy()
    nans = np.isnan(out)
    if not nans.any():
        return out
    if nans.all():
        raise ValueError("cannot interpolate an all-nan sequence")
    n = out.size
    idx = np.arange(n)
    good = idx[~nans]
    # wraparound anchor points on both sides
    xp = np.concatenate([good - n, good, good + n])
    fp = np.concatenate([out[good]] * 3)
    out[nans] = np.interp(idx[nans], xp, fp)
    return out
