"""Built-in strut models trained on reproducible phantom corpora.

No opaque binaries ship with the package: the default detector and coverage
classifier are re-derived deterministically from (corpus spec, seed) on
first use and cached per process.
"""

from __future__ import annotations

import numpy as np

from . import phantom, stent
from .phantom import CalciumLesionSpec, GuidewireSpec, LumenSpec, PhantomSpec, StrutSpec

DEFAULT_MODEL_SEED = 902

_cache: dict[int, tuple[stent.TrainedModel, stent.TrainedModel]] = {}


def training_specs(seed: int, n_pullbacks: int = 4) -> list[PhantomSpec]:
    """Deterministic phantom corpus with mixed covered/uncovered/absent struts."""
    rng = np.random.default_rng([seed, 7919])
    specs = []
    for _ in range(n_pullbacks):
        n_frames = 30
        lumen = LumenSpec(
            radius_mm=float(rng.uniform(1.2, 1.8)),
            ellipticity=float(rng.uniform(1.0, 1.25)),
            rotation_deg=float(rng.uniform(0, 180)),
        )
        gw_angle = float(rng.uniform(0, 360))
        struts: list[StrutSpec] = []
        for f in range(4, n_frames - 2, 2):
            n_struts = int(rng.integers(6, 10))
            base = float(rng.uniform(0, 360))
            for k in range(n_struts):
                angle = (base + 360.0 * k / n_struts + float(rng.uniform(-6, 6))) % 360.0
                if _angular_gap_deg(angle, gw_angle) < 16.0:
                    continue  # skip struts hidden by the guidewire shadow
                roll = rng.uniform()
                if roll < 0.55:
                    struts.append(StrutSpec(frame=f, angle_deg=angle,
                                            coverage_mm=float(rng.uniform(0.03, 0.25))))
                elif roll < 0.85:
                    struts.append(StrutSpec(frame=f, angle_deg=angle,
                                            offset_mm=float(rng.uniform(0.12, 0.45))))
                else:
                    struts.append(StrutSpec(frame=f, angle_deg=angle, offset_mm=0.0))
        lesions = (
            CalciumLesionSpec(
                frame_start=2, frame_end=min(14, n_frames - 1),
                angle_deg=float(rng.uniform(0, 360)), arc_deg=float(rng.uniform(50, 130)),
                depth_mm=float(rng.uniform(0.03, 0.2)),
                thickness_mm=float(rng.uniform(0.3, 0.8)),
            ),
        )
        specs.append(PhantomSpec(
            n_frames=n_frames, n_alines=420, n_r=800,
            lumen=lumen,
            guidewire=GuidewireSpec(angle_deg=gw_angle, width_deg=20.0),
            lesions=lesions, struts=tuple(struts), noise=1.0,
        ))
    return specs


def _angular_gap_deg(a: float, b: float) -> float:
    return abs((a - b + 180.0) % 360.0 - 180.0)


def collect_training_data(
    specs: list[PhantomSpec], seed: int, params: stent.StentParams = stent.StentParams()
):
    """Run detection on the corpus and label candidates against ground truth."""
    det_X, det_y = [], []
    cov_X, cov_y = [], []
    for k, spec in enumerate(specs):
        pullback, gt = phantom.generate(spec, seed + 1000 + k)
        band_masks = _band_masks_from_truth(gt, spec)
        for f in range(spec.n_frames):
            contour = gt.contour(f)
            mask = band_masks[f] if band_masks is not None else None
            frame = stent.prepare_frame(pullback.pixels[f])
            cands = stent.detect_candidates(frame, contour, mask, params)
            for c in cands:
                c.frame = f
            truths = [t for t in gt.struts if t.frame == f]
            matches = stent.match_to_truth(cands, truths, spec.n_alines)
            for cand, m in zip(cands, matches):
                det_X.append(stent.extract_features(cand, frame, contour))
                det_y.append(1 if m >= 0 else 0)
                if m >= 0:
                    cov_X.append(stent.coverage_features(cand, frame, contour))
                    cov_y.append(1 if truths[m].covered else 0)
    return (np.asarray(det_X), np.asarray(det_y),
            np.asarray(cov_X), np.asarray(cov_y))


def _band_masks_from_truth(gt: phantom.GroundTruth, spec: PhantomSpec):
    if gt.band_lower is None:
        return None
    idx = np.arange(spec.n_alines)[None, :]
    width = np.mod(gt.band_upper - gt.band_lower, spec.n_alines)[:, None]
    rel = np.mod(idx - gt.band_lower[:, None], spec.n_alines)
    return rel <= width


def build_default_models(seed: int = DEFAULT_MODEL_SEED):
    """Train (or fetch cached) detector + coverage models for this seed."""
    if seed in _cache:
        return _cache[seed]
    specs = training_specs(seed)
    det_X, det_y, cov_X, cov_y = collect_training_data(specs, seed)
    detector = stent.train(det_X, det_y, stent.STRUT_DETECTOR, seed)
    coverage = stent.train(cov_X, cov_y, stent.COVERAGE_CLASSIFIER, seed)
    detector.metadata["corpus"] = "builtin-v1"
    coverage.metadata["corpus"] = "builtin-v1"
    _cache[seed] = (detector, coverage)
    return detector, coverage
