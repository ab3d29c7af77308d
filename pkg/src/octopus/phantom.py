"""Synthetic pullback generator with exact ground truth.

Renders pullbacks that follow the appearance assumptions the detectors rely
on: dark lumen, bright tissue with exponential radial attenuation, calcium as
a signal-poor pocket with sharply delineated borders, stent struts as a
bright bloom with a fully shadowed wake, and the guidewire as a bright arc
whose shadow blanks the rest of the A-line. Given the same (spec, seed) the
rendered volume is byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import SpecInvalid
from .model import (
    LABEL_CALCIUM,
    LABEL_GUIDEWIRE,
    LABEL_LUMEN,
    Calibration,
    Contour,
    Pullback,
)
from .quant import FrameQuant, _max_circular_run, _max_run_per_row

U16_MAX = 65535


@dataclass(frozen=True)
class LumenSpec:
    """Elliptical lumen with optional per-frame radius profile and center drift.

    `radius_mm` is the semi-axis a; a scalar, a (start, end) linear ramp, or
    an explicit per-frame sequence. b = a * ellipticity.
    """

    radius_mm: float | tuple[float, float] | list = 1.5
    ellipticity: float = 1.0
    rotation_deg: float = 0.0
    center_start_mm: tuple[float, float] = (0.0, 0.0)
    center_end_mm: tuple[float, float] | None = None


@dataclass(frozen=True)
class GuidewireSpec:
    angle_deg: float = 180.0
    width_deg: float = 20.0
    drift_deg: float = 0.0        # linear angular drift over the pullback
    standoff_mm: float = 0.15     # how far inside the lumen boundary it sits


@dataclass(frozen=True)
class CalciumLesionSpec:
    frame_start: int
    frame_end: int  # inclusive
    angle_deg: float
    arc_deg: float
    depth_mm: float
    thickness_mm: float


@dataclass(frozen=True)
class StrutSpec:
    """One stent strut.

    `offset_mm` positions the bloom center luminal of the boundary (toward
    the catheter); negative values embed the strut. `coverage_mm > 0` renders
    tissue of exactly that thickness over the bloom (and implies embedding).
    """

    frame: int
    angle_deg: float
    offset_mm: float = 0.0
    coverage_mm: float = 0.0
    width_um: float = 90.0


@dataclass(frozen=True)
class IntensitySpec:
    tissue_level: float = 1.0
    lumen_level: float = 0.018
    calcium_level: float = 0.08
    bloom_level: float = 2.0
    guidewire_level: float = 1.8
    attenuation_mm: float = 1.0
    scale_u16: float = 12000.0


@dataclass(frozen=True)
class PhantomSpec:
    n_frames: int = 60
    n_alines: int = 504
    n_r: int = 976
    r_pixel_um: float = 5.0
    frame_spacing_mm: float = 0.2
    lumen: LumenSpec = field(default_factory=LumenSpec)
    guidewire: GuidewireSpec | None = field(default_factory=GuidewireSpec)
    lesions: tuple[CalciumLesionSpec, ...] = ()
    struts: tuple[StrutSpec, ...] = ()
    noise: float = 0.0
    intensity: IntensitySpec = field(default_factory=IntensitySpec)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lesions"] = [asdict(l) for l in self.lesions]
        d["struts"] = [asdict(s) for s in self.struts]
        return d

    @staticmethod
    def from_dict(d: dict) -> "PhantomSpec":
        d = dict(d)
        if "lumen" in d and isinstance(d["lumen"], dict):
            lum = dict(d["lumen"])
            for key in ("radius_mm", "center_start_mm", "center_end_mm"):
                if isinstance(lum.get(key), list):
                    lum[key] = tuple(lum[key]) if key != "radius_mm" or len(lum[key]) == 2 \
                        else lum[key]
            d["lumen"] = LumenSpec(**lum)
        if d.get("guidewire") is not None and isinstance(d["guidewire"], dict):
            d["guidewire"] = GuidewireSpec(**d["guidewire"])
        d["lesions"] = tuple(CalciumLesionSpec(**l) for l in d.get("lesions", []))
        d["struts"] = tuple(StrutSpec(**s) for s in d.get("struts", []))
        if isinstance(d.get("intensity"), dict):
            d["intensity"] = IntensitySpec(**d["intensity"])
        return PhantomSpec(**d)


@dataclass
class TrueStrut:
    """Ground-truth strut stub: geometry plus coverage/malapposition truth."""

    frame: int
    aline: int
    radius_px: float     # bloom center
    lead_px: float       # bloom leading edge (catheter side)
    covered: bool
    coverage_um: float
    malapposition_um: float


@dataclass
class GroundTruth:
    labels: np.ndarray                 # (n_frames, n_alines, n_r) uint8
    contours: np.ndarray               # (n_frames, n_alines) float, lumen boundary px
    band_lower: np.ndarray | None      # per-frame guidewire edge A-lines
    band_upper: np.ndarray | None
    struts: list[TrueStrut]
    frame_quant: list[FrameQuant]

    def contour(self, f: int) -> Contour:
        return Contour(radii=self.contours[f].copy())


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise SpecInvalid(path, msg)


def validate_spec(spec: PhantomSpec) -> None:
    _require(spec.n_frames >= 1, "n_frames", "must be >= 1")
    _require(spec.n_alines >= 8, "n_alines", "must be >= 8")
    _require(spec.n_r >= 300, "n_r", "must be >= 300")
    _require(spec.r_pixel_um > 0, "r_pixel_um", "must be positive")
    _require(spec.frame_spacing_mm > 0, "frame_spacing_mm", "must be positive")
    _require(0.0 <= spec.noise <= 2.0, "noise", "must be in [0, 2]")
    radii = _radius_profile(spec)
    max_r_px = radii.max() * 1000.0 / spec.r_pixel_um * max(1.0, spec.lumen.ellipticity)
    _require(
        max_r_px < spec.n_r - 300,
        "lumen.radius_mm",
        f"max lumen radius {max_r_px:.0f} px must leave a 300 px analysis depth",
    )
    _require(spec.lumen.ellipticity > 0, "lumen.ellipticity", "must be positive")
    if spec.guidewire is not None:
        _require(0 < spec.guidewire.width_deg < 360, "guidewire.width_deg",
                 "must be in (0, 360)")
    for k, les in enumerate(spec.lesions):
        path = f"lesions[{k}]"
        _require(0 <= les.frame_start <= les.frame_end < spec.n_frames,
                 f"{path}.frame_start", "frame range out of bounds")
        _require(0 < les.arc_deg <= 360, f"{path}.arc_deg", "must be in (0, 360]")
        _require(les.depth_mm >= 0, f"{path}.depth_mm", "must be >= 0")
        _require(les.thickness_mm > 0, f"{path}.thickness_mm", "must be positive")
    for k, s in enumerate(spec.struts):
        path = f"struts[{k}]"
        _require(0 <= s.frame < spec.n_frames, f"{path}.frame", "frame out of bounds")
        _require(s.coverage_mm >= 0, f"{path}.coverage_mm", "must be >= 0")
        _require(not (s.coverage_mm > 0 and s.offset_mm > 0),
                 f"{path}.offset_mm", "a covered strut cannot float in the lumen")


def _radius_profile(spec: PhantomSpec) -> np.ndarray:
    r = spec.lumen.radius_mm
    n = spec.n_frames
    if isinstance(r, (int, float)):
        return np.full(n, float(r))
    if isinstance(r, tuple) and len(r) == 2:
        return np.linspace(r[0], r[1], n)
    arr = np.asarray(r, dtype=np.float64)
    if arr.shape != (n,):
        raise SpecInvalid("lumen.radius_mm", f"profile length {arr.size} != n_frames {n}")
    return arr


def _center_path_px(spec: PhantomSpec) -> np.ndarray:
    px_per_mm = 1000.0 / spec.r_pixel_um
    c0 = np.asarray(spec.lumen.center_start_mm, dtype=np.float64)
    c1 = np.asarray(spec.lumen.center_end_mm if spec.lumen.center_end_mm is not None
                    else spec.lumen.center_start_mm, dtype=np.float64)
    t = np.linspace(0.0, 1.0, spec.n_frames)[:, None] if spec.n_frames > 1 \
        else np.zeros((1, 1))
    return (c0[None, :] * (1 - t) + c1[None, :] * t) * px_per_mm


def _boundary_radii_px(spec: PhantomSpec) -> np.ndarray:
    """Lumen boundary radius (px) per (frame, A-line) by ray-ellipse intersection."""
    px_per_mm = 1000.0 / spec.r_pixel_um
    a = _radius_profile(spec) * px_per_mm                     # (F,)
    b = a * spec.lumen.ellipticity
    centers = _center_path_px(spec)                           # (F, 2)
    rot = math.radians(spec.lumen.rotation_deg)
    theta = np.arange(spec.n_alines) * (2.0 * np.pi / spec.n_alines)
    # unit ray directions rotated into the ellipse frame
    vx = np.cos(theta - rot)[None, :]
    vy = np.sin(theta - rot)[None, :]
    cr, sr = math.cos(-rot), math.sin(-rot)
    wx = -(centers[:, 0] * cr - centers[:, 1] * sr)[:, None]
    wy = -(centers[:, 0] * sr + centers[:, 1] * cr)[:, None]
    a2 = (a ** 2)[:, None]
    b2 = (b ** 2)[:, None]
    A = vx ** 2 / a2 + vy ** 2 / b2
    B = 2.0 * (vx * wx / a2 + vy * wy / b2)
    C = wx ** 2 / a2 + wy ** 2 / b2 - 1.0
    if np.any(C >= 0):
        raise SpecInvalid("lumen.center_start_mm", "catheter must stay inside the lumen")
    disc = B ** 2 - 4.0 * A * C
    return (-B + np.sqrt(disc)) / (2.0 * A)


def _circ_dist_deg(a: np.ndarray | float, b: float) -> np.ndarray:
    d = np.abs(np.mod(np.asarray(a) - b + 180.0, 360.0) - 180.0)
    return d


def _band_alines(spec: PhantomSpec, frame: int) -> tuple[np.ndarray, int, int]:
    gw = spec.guidewire
    frac = frame / max(spec.n_frames - 1, 1)
    center = gw.angle_deg + gw.drift_deg * frac
    step = 360.0 / spec.n_alines
    angles = np.arange(spec.n_alines) * step
    mask = _circ_dist_deg(angles, center) <= gw.width_deg / 2.0
    lower = int(np.ceil((center - gw.width_deg / 2.0) / step)) % spec.n_alines
    upper = int(np.floor((center + gw.width_deg / 2.0) / step)) % spec.n_alines
    return mask, lower, upper


def _strut_geometry(spec: PhantomSpec, strut: StrutSpec, radii_f: np.ndarray):
    """Resolve rendered bloom placement of one strut on its frame."""
    px_per_mm = 1000.0 / spec.r_pixel_um
    step = 360.0 / spec.n_alines
    center_aline = int(round(strut.angle_deg / step)) % spec.n_alines
    boundary = radii_f[center_aline]
    bloom_px = 4  # metallic bloom radial thickness
    coverage = strut.coverage_mm if strut.coverage_mm > 0 else max(0.0, -strut.offset_mm)
    if coverage > 0:
        lead = boundary + coverage * px_per_mm
    else:
        center = boundary - strut.offset_mm * px_per_mm
        lead = center - bloom_px / 2.0
    radius = lead + bloom_px / 2.0
    arc_um_per_aline = 2.0 * np.pi * max(radius, 1.0) * spec.r_pixel_um / spec.n_alines
    half_alines = max(1, int(round(strut.width_um / (2.0 * arc_um_per_aline))))
    return center_aline, half_alines, lead, radius, bloom_px, coverage


def generate(spec: PhantomSpec, seed: int) -> tuple[Pullback, GroundTruth]:
    """Render a phantom pullback and its exact ground truth."""
    validate_spec(spec)
    F, A, R = spec.n_frames, spec.n_alines, spec.n_r
    inten = spec.intensity
    px_per_mm = 1000.0 / spec.r_pixel_um
    att_px = inten.attenuation_mm * px_per_mm
    radii = _boundary_radii_px(spec)                          # (F, A)
    cols = np.arange(R, dtype=np.float64)[None, :]            # (1, R)

    pixels = np.empty((F, A, R), dtype=np.uint16)
    labels = np.zeros((F, A, R), dtype=np.uint8)
    band_lower = np.zeros(F, dtype=np.int64) if spec.guidewire else None
    band_upper = np.zeros(F, dtype=np.int64) if spec.guidewire else None
    struts_truth: list[TrueStrut] = []
    struts_by_frame: dict[int, list[StrutSpec]] = {}
    for s in spec.struts:
        struts_by_frame.setdefault(s.frame, []).append(s)
    lesions_by_frame: dict[int, list[CalciumLesionSpec]] = {}
    for les in spec.lesions:
        for f in range(les.frame_start, les.frame_end + 1):
            lesions_by_frame.setdefault(f, []).append(les)

    angles = np.arange(A) * (360.0 / A)
    for f in range(F):
        bnd = radii[f][:, None]                               # (A, 1)
        depth = cols - bnd
        img = np.where(depth < 0, inten.lumen_level,
                       inten.tissue_level * np.exp(-np.maximum(depth, 0.0) / att_px))
        lab = np.zeros((A, R), dtype=np.uint8)
        lab[depth < 0] = LABEL_LUMEN

        for les in lesions_by_frame.get(f, ()):
            arc_mask = _circ_dist_deg(angles, les.angle_deg) <= les.arc_deg / 2.0
            inner = radii[f] + les.depth_mm * px_per_mm
            outer = inner + les.thickness_mm * px_per_mm
            region = arc_mask[:, None] & (cols >= inner[:, None]) & (cols < outer[:, None])
            img[region] = inten.calcium_level
            lab[region] = LABEL_CALCIUM

        for s in struts_by_frame.get(f, ()):
            ca, half, lead, radius, bloom_px, coverage = _strut_geometry(spec, s, radii[f])
            als = (ca + np.arange(-half, half + 1)) % A
            for a in als:
                # covered blooms track the local boundary so the rendered tissue
                # thickness stays exact; floating struts are rigid (fixed radius)
                local_lead = lead - radii[f][ca] + radii[f][a] if coverage > 0 else lead
                j0 = int(round(local_lead))
                j1 = min(j0 + bloom_px, R)
                if j0 < 0 or j0 >= R:
                    continue
                img[a, j0:j1] = inten.bloom_level
                img[a, j1:] = 0.0
            struts_truth.append(TrueStrut(
                frame=f, aline=int(ca), radius_px=float(radius), lead_px=float(lead),
                covered=coverage > 0, coverage_um=float(coverage * 1000.0),
                malapposition_um=float(max(0.0, s.offset_mm) * 1000.0
                                       if coverage == 0 else 0.0),
            ))

        if spec.guidewire is not None:
            gw_mask, lo, up = _band_alines(spec, f)
            band_lower[f] = lo
            band_upper[f] = up
            gw_r = np.maximum(radii[f] - spec.guidewire.standoff_mm * px_per_mm, 8.0)
            for a in np.flatnonzero(gw_mask):
                j0 = int(round(gw_r[a])) - 3
                j1 = j0 + 6
                img[a, :max(j0, 0)] = inten.lumen_level
                img[a, max(j0, 0):j1] = inten.guidewire_level
                img[a, j1:] = 0.0
            lab[gw_mask, :] = LABEL_GUIDEWIRE

        if spec.noise > 0:
            rng = np.random.default_rng([seed, f])
            mult = (1.0 - spec.noise) + spec.noise * rng.exponential(1.0, size=(A, R))
            img = img * mult
        pixels[f] = np.clip(img * inten.scale_u16, 0, U16_MAX).astype(np.uint16)
        labels[f] = lab

    cal = Calibration(r_pixel_um=spec.r_pixel_um, frame_spacing_mm=spec.frame_spacing_mm)
    pullback = Pullback(pixels=pixels, calibration=cal, id=f"phantom-{seed}")
    fq = _truth_frame_quant(spec, radii, labels, cal)
    gt = GroundTruth(labels=labels, contours=radii, band_lower=band_lower,
                     band_upper=band_upper, struts=struts_truth, frame_quant=fq)
    return pullback, gt


def _truth_frame_quant(
    spec: PhantomSpec, radii: np.ndarray, labels: np.ndarray, cal: Calibration
) -> list[FrameQuant]:
    """Analytic lumen attributes plus label-derived calcium attributes."""
    a_mm = _radius_profile(spec)
    b_mm = a_mm * spec.lumen.ellipticity
    n = spec.n_alines
    half = np.arange(n // 2) * (2.0 * np.pi / n)
    rot = math.radians(spec.lumen.rotation_deg)
    out = []
    for f in range(spec.n_frames):
        a, b = a_mm[f], b_mm[f]
        # center chords of an ellipse; the centroid is the center regardless of drift
        r_half = a * b / np.sqrt((b * np.cos(half - rot)) ** 2 + (a * np.sin(half - rot)) ** 2)
        chords = 2.0 * r_half
        calc = _truth_calcium(labels[f], radii[f], cal)
        out.append(FrameQuant(
            frame=f,
            lumen_area_mm2=math.pi * a * b,
            diam_max_mm=float(chords.max()),
            diam_min_mm=float(chords.min()),
            diam_mean_mm=float(chords.mean()),
            **calc,
        ))
    return out


def _truth_calcium(labels_frame: np.ndarray, radii_f: np.ndarray, cal: Calibration) -> dict:
    mask = labels_frame == LABEL_CALCIUM
    has = mask.any(axis=1)
    if not has.any():
        return {"calc_angle_deg": 0.0, "calc_max_thickness_mm": math.nan,
                "calc_min_depth_mm": math.nan}
    closed = has | (np.roll(has, 1) & np.roll(has, -1))
    angle = _max_circular_run(closed) * (360.0 / has.size)
    thick = _max_run_per_row(mask).astype(np.float64)
    inner = np.argmax(mask, axis=1).astype(np.float64)
    depth = np.maximum(inner - radii_f, 0.0)
    mm = cal.r_pixel_mm
    return {
        "calc_angle_deg": float(angle),
        "calc_max_thickness_mm": float(thick[has].max() * mm),
        "calc_min_depth_mm": float(depth[has].min() * mm),
    }


def perturb(pullback: Pullback, kind: str, amount: float) -> Pullback:
    """Deterministic robustness transform: frame_shift, intensity_scale, angular_roll."""
    if kind == "frame_shift":
        k = int(amount)
        out = np.zeros_like(pullback.pixels)
        if k >= 0:
            out[k:] = pullback.pixels[: pullback.n_frames - k] if k else pullback.pixels
        else:
            out[:k] = pullback.pixels[-k:]
        return Pullback(pixels=out, calibration=pullback.calibration,
                        id=pullback.id + f"+shift{k}")
    if kind == "intensity_scale":
        scaled = np.clip(pullback.pixels.astype(np.float64) * amount, 0, U16_MAX)
        return Pullback(pixels=np.round(scaled).astype(np.uint16),
                        calibration=pullback.calibration,
                        id=pullback.id + f"+scale{amount:g}")
    if kind == "angular_roll":
        return Pullback(pixels=np.roll(pullback.pixels, int(amount), axis=1),
                        calibration=pullback.calibration,
                        id=pullback.id + f"+roll{int(amount)}")
    raise ValueError(f"unknown perturbation kind {kind!r}")
