"""Stent deployment analysis: strut detection, classification, and metrics.

Candidates are bright blooms followed radially by a deep shadow; a bagged
decision-tree ensemble separates true struts from look-alikes (calcium
borders, speckle), and a maximum-margin classifier decides tissue coverage
from center/side patch statistics. All intensity features are ratios against
frame-level references, which keeps the pipeline invariant to global
intensity scaling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter as _nd_gaussian

from .errors import (
    DegenerateTraining,
    FormatError,
    InsufficientStruts,
    ModelKindMismatch,
)
from .ml import BaggedTrees, LinearMargin
from .model import Calibration, Contour
from .quant import contour_points_mm, interpolate_circular

STRUT_DETECTOR = "strut_detector"
COVERAGE_CLASSIFIER = "coverage_classifier"

N_DETECTOR_FEATURES = 12
N_COVERAGE_FEATURES = 21

MODEL_MAGIC = b"OCTM"
_KIND_BYTES = {STRUT_DETECTOR: 1, COVERAGE_CLASSIFIER: 2}
_BYTE_KINDS = {v: k for k, v in _KIND_BYTES.items()}


@dataclass
class StrutCandidate:
    frame: int
    aline: int
    alines: tuple[int, ...]
    peak_r: float
    lead_r: float
    trail_r: float
    peak_val: float
    shadow_ratio: float


@dataclass
class StrutRecord:
    """One confirmed strut with geometry, classification, and metrics."""

    frame: int
    aline: int
    radius_px: float
    bloom_extent_px: float
    shadow_width_alines: int
    score: float
    covered: bool = False
    coverage_um: float = 0.0
    malapposition_um: float = 0.0
    malapposed: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainedModel:
    kind: str
    model: BaggedTrees | LinearMargin
    metadata: dict


@dataclass(frozen=True)
class StentParams:
    peak_frac: float = 0.3
    shadow_ratio: float = 0.4
    search_in_px: int = 260
    search_out_px: int = 120
    shadow_window_px: int = 150
    score_threshold: float = 0.5
    strut_thickness_um: float = 80.0
    malapposition_margin_um: float = 20.0


def prepare_frame(frame: np.ndarray, sigma_aline: float = 1.0, sigma_r: float = 1.2) -> np.ndarray:
    """Light speckle suppression; every stent routine expects this output."""
    return _nd_gaussian(frame.astype(np.float32), sigma=(sigma_aline, sigma_r),
                        mode="nearest")


def _wall_reference(frame: np.ndarray, contour: Contour) -> float:
    """Median tissue brightness just past the lumen boundary."""
    A, R = frame.shape
    idx = np.clip(np.round(contour.radii).astype(int) + 5, 0, R - 1)
    return max(float(np.median(frame[np.arange(A), idx])), 1e-6)


def _bloom_edges(line: np.ndarray, peak: int) -> tuple[float, float]:
    """Bloom edges located at the steepest rise/fall flanking the peak.

    The search stays within the bloom's immediate vicinity so that, for
    thinly covered struts, the lumen boundary's own rise cannot capture the
    leading edge.
    """
    R = line.size
    lo = max(peak - 6, 1)
    hi = min(peak + 6, R - 2)
    rise = np.maximum(line[lo:peak + 1] - line[lo - 1:peak], 0.0)
    fall = np.maximum(line[peak:hi] - line[peak + 1:hi + 1], 0.0)
    # slope-squared centroids: argmax under speckle biases inward, the
    # centroid of the squared slope mass does not
    if rise.size and rise.max() > 0:
        w = np.where(rise >= 0.5 * rise.max(), rise ** 2, 0.0)
        lead = float(np.sum(np.arange(lo, peak + 1) * w) / np.sum(w))
    else:
        lead = float(peak)
    if fall.size and fall.max() > 0:
        w = np.where(fall >= 0.5 * fall.max(), fall ** 2, 0.0)
        trail = float(np.sum(np.arange(peak, hi) * w) / np.sum(w)) + 1.0
    else:
        trail = float(peak)
    trail = max(trail, lead)
    # blooms are a few pixels thick; when a thin covered gap merges the
    # boundary rise into the bloom rise, bound the lead by the trail edge
    lead = max(lead, trail - 8.0)
    return lead, trail


def detect_candidates(
    frame: np.ndarray,
    contour: Contour,
    band_mask: np.ndarray | None = None,
    params: StentParams = StentParams(),
) -> list[StrutCandidate]:
    """Find bloom-plus-shadow candidates on one prepared frame (`prepare_frame`).

    Shadow first: an A-line qualifies when the deep tissue behind the wall is
    dark relative to the wall reference (the strut wake). The bloom is then
    the brightest sample of the radial search window, its edges localized at
    the steepest intensity rise/fall. Adjacent A-line hits merge into one
    candidate at the intensity-weighted angular centroid.
    """
    frame = frame.astype(np.float32)
    A, R = frame.shape
    bright_ref = float(np.percentile(frame, 99.5))
    wall_ref = _wall_reference(frame, contour)
    if bright_ref <= 0 or wall_ref <= 0:
        return []
    rows = np.arange(A)[:, None]
    c_int = np.clip(np.round(contour.radii).astype(int), 0, R - 1)
    deep_idx = np.clip(c_int[:, None] + np.arange(70, 250)[None, :], 0, R - 1)
    deep_ratio = frame[rows, deep_idx].mean(axis=1) / wall_ref
    hits: dict[int, tuple[int, float, float, float]] = {}
    for a in range(A):
        if band_mask is not None and band_mask[a]:
            continue
        if deep_ratio[a] >= params.shadow_ratio:
            continue
        c = contour.radii[a]
        j0 = int(max(8, c - params.search_in_px))
        j1 = int(min(R - 50, c + params.search_out_px))
        if j1 <= j0:
            continue
        line = frame[a]
        # bloom signature: bright sample whose wake (4..44 px behind) is dark;
        # plain argmax would land on wall tissue for covered struts
        cs = np.cumsum(line, dtype=np.float64)
        j = np.arange(j0, j1)
        behind = (cs[j + 44] - cs[j + 4]) / 40.0
        shadowness = np.clip(1.0 - behind / (0.55 * wall_ref), 0.0, 1.0)
        score = line[j0:j1] * shadowness
        peak = j0 + int(np.argmax(score))
        peak_val = float(line[peak])
        if peak_val < params.peak_frac * bright_ref or peak_val < 1.25 * wall_ref:
            continue
        lead, trail = _bloom_edges(line, peak)
        if trail - lead > 30:  # blooms are thin; wide bright spans are tissue
            continue
        hits[a] = (peak, peak_val, float(lead), float(trail))
    return _merge_hits(hits, A, frame, params, wall_ref, deep_ratio, c_int)


def _merge_hits(hits, n_alines, frame, params, wall_ref, deep_ratio, c_int) -> list[StrutCandidate]:
    if not hits:
        return []
    alines = sorted(hits)
    # group circularly adjacent A-lines
    groups: list[list[int]] = [[alines[0]]]
    for a in alines[1:]:
        if a - groups[-1][-1] <= 1:
            groups[-1].append(a)
        else:
            groups.append([a])
    if len(groups) > 1 and (alines[0] + n_alines - groups[-1][-1]) <= 1:
        groups[0] = groups.pop() + groups[0]
    out = []
    for g in groups:
        peaks = np.array([hits[a][0] for a in g], dtype=np.float64)
        vals = np.array([hits[a][1] for a in g])
        w = vals / vals.sum()
        # circular intensity-weighted angular centroid
        base = g[0]
        rel = np.array([(a - base) % n_alines for a in g], dtype=np.float64)
        centroid = int(round(base + float(np.sum(w * rel)))) % n_alines
        # re-localize the bloom edges on a boundary-aligned A-line average,
        # which suppresses speckle slope spikes that bias per-line edges inward
        R = frame.shape[1]
        cols = np.arange(R)
        rel_shift = np.array([c_int[a] - c_int[centroid] for a in g])
        aligned = np.stack([
            frame[a, np.clip(cols + sh, 0, R - 1)] for a, sh in zip(g, rel_shift)
        ])
        avg = aligned.mean(axis=0)
        peak_avg = int(round(float(np.sum(w * (peaks - rel_shift)))))
        peak_avg = int(np.clip(peak_avg, 1, R - 2))
        lead, trail = _bloom_edges(avg, peak_avg)
        out.append(StrutCandidate(
            frame=-1, aline=centroid, alines=tuple(g),
            peak_r=float(np.sum(w * peaks)), lead_r=float(lead),
            trail_r=float(trail), peak_val=float(vals.max()),
            shadow_ratio=float(deep_ratio[centroid]),
        ))
    return out


def _side_alines(aline: int, span: int, n_alines: int) -> tuple[np.ndarray, np.ndarray]:
    offs = np.arange(span + 2, span + 7)
    return (aline - offs) % n_alines, (aline + offs) % n_alines


def _patch_stats(values: np.ndarray, wall_ref: float) -> list[float]:
    if values.size == 0:
        return [0.0, 0.0, 0.0, 0.0, 0.0]
    v = values / wall_ref
    return [float(v.mean()), float(v.min()), float(v.max()), float(v.std()),
            float((v > 0.35).mean())]


def extract_features(cand: StrutCandidate, frame: np.ndarray, contour: Contour) -> np.ndarray:
    """12 detector features from the bloom, its shadow, and side patches."""
    frame = frame.astype(np.float32)
    A, R = frame.shape
    a = cand.aline
    c = float(contour.radii[a])
    bright_ref = max(float(np.percentile(frame, 99.5)), 1e-6)
    wall_ref = _wall_reference(frame, contour)
    lead, trail = int(cand.lead_r), int(cand.trail_r)
    span = len(cand.alines)
    s0 = min(trail + 3, R - 1)
    s1 = min(s0 + 300, R)
    shadow_long = float((frame[a, s0:s1] < 0.1 * wall_ref).mean()) if s1 > s0 else 0.0
    gap0, gap1 = int(min(c, lead)), int(max(c, lead))
    gap_mean = float(frame[a, gap0:gap1].mean()) / wall_ref if gap1 > gap0 else 0.0
    left, right = _side_alines(a, span // 2, A)
    side_idx = np.concatenate([left, right])
    r0, r1 = max(lead, 0), min(trail + 1, R)
    side_mean = float(frame[side_idx, r0:r1].mean()) / wall_ref if r1 > r0 else 0.0
    lead_sharp = (frame[a, min(lead + 1, R - 1)] - frame[a, max(lead - 2, 0)]) / wall_ref
    trail_sharp = (frame[a, max(trail - 1, 0)] - frame[a, min(trail + 2, R - 1)]) / wall_ref
    feats = np.array([
        cand.peak_val / bright_ref,
        (cand.trail_r - cand.lead_r + 1.0) / 10.0,
        cand.peak_val / wall_ref / 3.0,
        cand.shadow_ratio,
        span / 5.0,
        shadow_long,
        (cand.peak_r - c) / 100.0,
        float(lead_sharp),
        float(trail_sharp),
        gap_mean,
        side_mean,
        cand.peak_val / (wall_ref * max(side_mean, 1e-3)) / 10.0,
    ], dtype=np.float64)
    return np.nan_to_num(feats, nan=0.0, posinf=1e3, neginf=-1e3)


def coverage_features(cand: StrutCandidate, frame: np.ndarray, contour: Contour) -> np.ndarray:
    """21 coverage features from the center patch and both side patches."""
    frame = frame.astype(np.float32)
    A, R = frame.shape
    a = cand.aline
    c = float(contour.radii[a])
    wall_ref = _wall_reference(frame, contour)
    lead = int(cand.lead_r)
    gap0, gap1 = int(min(c, lead)), int(max(c, lead))
    span = len(cand.alines)
    left, right = _side_alines(a, span // 2, A)
    center = frame[a, gap0:gap1]
    left_patch = frame[left][:, gap0:gap1].ravel() if gap1 > gap0 else np.array([])
    right_patch = frame[right][:, gap0:gap1].ravel() if gap1 > gap0 else np.array([])
    pre0 = max(lead - 4, 0)
    post1 = int(min(c + 4, R))
    feats = (
        [(cand.lead_r - c) / 40.0]
        + _patch_stats(center, wall_ref)
        + _patch_stats(left_patch, wall_ref)
        + _patch_stats(right_patch, wall_ref)
        + [
            float(frame[a, pre0:max(lead, pre0 + 1)].mean()) / wall_ref,
            float(frame[a, int(c):post1].mean()) / wall_ref if post1 > int(c) else 0.0,
            (cand.trail_r - cand.lead_r + 1.0) / 10.0,
            cand.peak_val / wall_ref / 3.0,
            cand.shadow_ratio,
        ]
    )
    out = np.asarray(feats, dtype=np.float64)
    return np.nan_to_num(out, nan=0.0, posinf=1e3, neginf=-1e3)


def train(X: np.ndarray, y: np.ndarray, kind: str, seed: int) -> TrainedModel:
    """Fit a model of the given kind; reports held-out accuracy in metadata."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise DegenerateTraining("training data must contain both classes")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(y))
    n_holdout = max(1, len(y) // 5)
    test_idx, train_idx = order[:n_holdout], order[n_holdout:]
    if len(np.unique(y[train_idx])) < 2:
        train_idx = order  # tiny sets: train on everything
    if kind == STRUT_DETECTOR:
        model = BaggedTrees(n_trees=25, max_depth=8, min_leaf=3).fit(
            X[train_idx], y[train_idx], seed)
        pred = model.predict_proba(X[test_idx]) >= 0.5
    elif kind == COVERAGE_CLASSIFIER:
        model = LinearMargin().fit(X[train_idx], y[train_idx], seed)
        pred = model.predict(X[test_idx]).astype(bool)
    else:
        raise ModelKindMismatch(f"unknown model kind {kind!r}")
    accuracy = float((pred == y[test_idx].astype(bool)).mean())
    return TrainedModel(kind=kind, model=model,
                        metadata={"seed": seed, "n_train": int(len(train_idx)),
                                  "heldout_accuracy": accuracy})


def classify_struts(
    candidates: list[StrutCandidate],
    features: np.ndarray,
    model: TrainedModel,
    threshold: float = 0.5,
) -> list[StrutRecord]:
    """Keep candidates the detector scores at or above the threshold."""
    if model.kind != STRUT_DETECTOR:
        raise ModelKindMismatch(f"expected {STRUT_DETECTOR}, got {model.kind}")
    if not candidates:
        return []
    scores = model.model.predict_proba(np.asarray(features))
    records = []
    for cand, score in zip(candidates, scores):
        if score >= threshold:
            records.append(StrutRecord(
                frame=cand.frame, aline=cand.aline,
                radius_px=(cand.lead_r + cand.trail_r) / 2.0,
                bloom_extent_px=cand.trail_r - cand.lead_r + 1.0,
                shadow_width_alines=len(cand.alines),
                score=float(score),
            ))
    return records


def classify_coverage(
    record: StrutRecord,
    cand: StrutCandidate,
    frame: np.ndarray,
    contour: Contour,
    model: TrainedModel,
    cal: Calibration,
) -> StrutRecord:
    """Decide covered/uncovered and measure the overlying tissue thickness.

    Coverage is the radial distance from the bloom leading edge to the lumen
    boundary along the strut's A-line; the covered label requires both the
    classifier vote and a positive measured thickness, keeping the
    covered <=> coverage > 0 biconditional intact.
    """
    if model.kind != COVERAGE_CLASSIFIER:
        raise ModelKindMismatch(f"expected {COVERAGE_CLASSIFIER}, got {model.kind}")
    feats = coverage_features(cand, frame, contour)
    vote = bool(model.model.predict(feats[None, :])[0])
    local = repaired_boundary(contour, cand.alines)
    measured_um = (cand.lead_r - float(local.radii[record.aline])) * cal.r_pixel_um
    covered = vote and measured_um > 0
    record.covered = covered
    record.coverage_um = float(measured_um) if covered else 0.0
    return record


def repaired_boundary(contour: Contour, span: tuple[int, ...]) -> Contour:
    """Contour with the strut's own A-lines re-interpolated from neighbors.

    Blooms and shadows corrupt the local boundary estimate, so coverage and
    malapposition measure against the boundary implied by the surrounding
    A-lines (the guidewire treatment, applied per strut).
    """
    radii = contour.radii.astype(np.float64).copy()
    n = radii.size
    for a in span:
        for d in (-1, 0, 1):
            radii[(a + d) % n] = np.nan
    if np.isnan(radii).all():
        return contour
    return Contour(radii=interpolate_circular(radii))


def fit_stent_contour(struts: list[StrutRecord], n_alines: int) -> Contour:
    """Periodic linear interpolation of strut (theta, r) points over 360 deg."""
    if len(struts) < 2:
        raise InsufficientStruts(f"need >= 2 struts, have {len(struts)}")
    radii = np.full(n_alines, np.nan)
    for s in struts:
        radii[s.aline % n_alines] = s.radius_px
    return Contour(radii=interpolate_circular(radii))


def measure_malapposition(
    record: StrutRecord,
    contour: Contour,
    cal: Calibration,
    *,
    strut_thickness_um: float = 80.0,
    margin_um: float = 20.0,
    span: tuple[int, ...] | None = None,
) -> StrutRecord:
    """Distance from the strut center to the closest lumen-boundary point.

    A strut is flagged malapposed when it lies luminal of the boundary and
    the gap exceeds the strut thickness plus the margin.
    """
    if span:
        contour = repaired_boundary(contour, span)
    n = contour.n_alines
    theta = (record.aline % n) * (2.0 * np.pi / n)
    p = np.array([record.radius_px * cal.r_pixel_mm * np.cos(theta),
                  record.radius_px * cal.r_pixel_mm * np.sin(theta)])
    poly = contour_points_mm(contour, cal)
    dist_mm = _min_dist_to_polyline(p, poly)
    luminal = record.radius_px < float(contour.radii[record.aline % n])
    dist_um = dist_mm * 1000.0
    record.malapposition_um = float(dist_um) if luminal else 0.0
    record.malapposed = bool(luminal and dist_um > strut_thickness_um + margin_um)
    return record


def _min_dist_to_polyline(p: np.ndarray, poly: np.ndarray) -> float:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    ap = p[None, :] - a
    denom = np.maximum((ab * ab).sum(axis=1), 1e-12)
    t = np.clip((ap * ab).sum(axis=1) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = np.hypot(*(p[None, :] - proj).T)
    return float(d.min())


def summarize_stent(records: list[StrutRecord], cal: Calibration) -> dict:
    """Pullback-level stent report, including malapposed segment lengths."""
    if not records:
        return {"n_struts": 0, "n_covered": 0, "n_uncovered": 0,
                "pct_covered": 0.0, "mean_coverage_um": 0.0,
                "mean_malapposition_um": 0.0, "max_malapposition_um": 0.0,
                "malapposed_segments_mm": [], "frames": {}}
    frames: dict[int, dict] = {}
    for r in records:
        row = frames.setdefault(r.frame, {"covered": 0, "uncovered": 0, "malapposed": 0})
        row["covered" if r.covered else "uncovered"] += 1
        if r.malapposed:
            row["malapposed"] += 1
    covered = [r for r in records if r.covered]
    malapposed = [r for r in records if r.malapposed]
    mal_frames = sorted({r.frame for r in malapposed})
    segments = []
    run = []
    for f in mal_frames:
        if run and f != run[-1] + 1:
            segments.append(len(run) * cal.frame_spacing_mm)
            run = []
        run.append(f)
    if run:
        segments.append(len(run) * cal.frame_spacing_mm)
    return {
        "n_struts": len(records),
        "n_covered": len(covered),
        "n_uncovered": len(records) - len(covered),
        "pct_covered": 100.0 * len(covered) / len(records),
        "mean_coverage_um": float(np.mean([r.coverage_um for r in covered])) if covered else 0.0,
        "mean_malapposition_um": float(np.mean([r.malapposition_um for r in malapposed]))
        if malapposed else 0.0,
        "max_malapposition_um": float(max((r.malapposition_um for r in malapposed), default=0.0)),
        "malapposed_segments_mm": [round(s, 6) for s in segments],
        "frames": {str(f): v for f, v in sorted(frames.items())},
    }


def save_model(model: TrainedModel, path: str | Path) -> Path:
    """Versioned binary model file: magic, kind byte, parameter blob, metadata."""
    path = Path(path)
    blob = json.dumps(model.model.to_dict(), sort_keys=True).encode("utf-8")
    meta = json.dumps(model.metadata, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(bytes([_KIND_BYTES[model.kind]]))
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        fh.write(len(meta).to_bytes(4, "little"))
        fh.write(meta)
    return path


def load_model(path: str | Path) -> TrainedModel:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise FormatError("bad model magic", offset=0)
    kind = _BYTE_KINDS.get(raw[4])
    if kind is None:
        raise FormatError(f"unknown model kind byte {raw[4]}", offset=4)
    blob_len = int.from_bytes(raw[5:9], "little")
    blob = json.loads(raw[9:9 + blob_len].decode("utf-8"))
    meta_off = 9 + blob_len
    meta_len = int.from_bytes(raw[meta_off:meta_off + 4], "little")
    metadata = json.loads(raw[meta_off + 4:meta_off + 4 + meta_len].decode("utf-8"))
    model = BaggedTrees.from_dict(blob) if kind == STRUT_DETECTOR \
        else LinearMargin.from_dict(blob)
    return TrainedModel(kind=kind, model=model, metadata=metadata)


def match_to_truth(
    candidates: list, truths: list, n_alines: int,
    *, aline_tol: int = 3, radius_tol: float = 8.0,
) -> list[int]:
    """Index of the matching true strut per candidate (-1 when unmatched)."""
    out = []
    for cand in candidates:
        best, best_d = -1, 1e9
        for k, t in enumerate(truths):
            if t.frame != cand.frame:
                continue
            da = min((cand.aline - t.aline) % n_alines, (t.aline - cand.aline) % n_alines)
            radius = (cand.lead_r + cand.trail_r) / 2.0 if hasattr(cand, "lead_r") \
                else cand.radius_px
            dr = abs(radius - t.radius_px)
            if da <= aline_tol and dr <= radius_tol and da + dr / 4.0 < best_d:
                best, best_d = k, da + dr / 4.0
        out.append(best)
    return out


def analyze_stent(
    pullback,
    contours: list[Contour | None],
    band_masks: np.ndarray | None,
    detector: TrainedModel,
    coverage_model: TrainedModel,
    params: StentParams = StentParams(),
) -> tuple[list[StrutRecord], dict[int, Contour]]:
    """Full per-frame stent analysis over a pullback.

    Returns all confirmed strut records plus the interpolated stent contour
    for every frame holding at least two struts.
    """
    cal = pullback.calibration
    records: list[StrutRecord] = []
    stent_contours: dict[int, Contour] = {}
    for f in range(pullback.n_frames):
        contour = contours[f]
        if contour is None:
            continue
        mask = band_masks[f] if band_masks is not None else None
        frame = prepare_frame(pullback.pixels[f])
        cands = detect_candidates(frame, contour, mask, params)
        if not cands:
            continue
        for c in cands:
            c.frame = f
        feats = np.stack([extract_features(c, frame, contour) for c in cands])
        kept = classify_struts(cands, feats, detector, params.score_threshold)
        by_aline = {c.aline: c for c in cands}
        for rec in kept:
            cand = by_aline[rec.aline]
            classify_coverage(rec, cand, frame, contour, coverage_model, cal)
            measure_malapposition(
                rec, contour, cal,
                strut_thickness_um=params.strut_thickness_um,
                margin_um=params.malapposition_margin_um,
                span=cand.alines,
            )
            records.append(rec)
        frame_recs = [r for r in records if r.frame == f]
        if len(frame_recs) >= 2:
            stent_contours[f] = fit_stent_contour(frame_recs, pullback.n_alines)
    return records, stent_contours
