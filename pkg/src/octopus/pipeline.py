"""End-to-end analysis pipeline, artifact export, and the batch job queue.

Stage order: preprocess (guidewire + lumen + shifting) -> plaque -> stent
(stent_analysis mode only) -> quant -> export. Failed frames are flagged and
skipped, never aborting the pullback. Identical (pullback, config, models,
seed) produce byte-identical label files and CSVs.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import binary_opening

from typing import Callable

from . import container, plaque, preprocess, quant, stent
from .config import PipelineConfig, load_config
from .errors import NoShadowFound, OctopusError
from .model import LABEL_LUMEN, Calibration, Contour, Pullback
from .modelbank import build_default_models


@dataclass
class PipelineResult:
    pullback_id: str
    frame_offset: int                  # first analyzed frame (ROI start)
    calibration: Calibration
    labels: np.ndarray
    contours: list[Contour | None]
    band: preprocess.GuidewireBand | None
    gate: plaque.FrameGate
    frame_quants: list[quant.FrameQuant]
    lesions: list[quant.LesionQuant]
    strut_records: list[stent.StrutRecord]
    stent_contours: dict[int, Contour]
    stent_summary: dict
    failed_frames: list[int]
    timings: dict[str, float] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    provider: str = "reference"


@dataclass
class AnalysisJob:
    pullback_path: str
    out_dir: str
    config: PipelineConfig
    job_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    status: str = "queued"  # queued -> running -> done | failed
    stage: str = ""
    progress: float = 0.0
    error: str | None = None
    timings: dict[str, float] = field(default_factory=dict)
    result: PipelineResult | None = None
    on_complete: Callable | None = field(default=None, repr=False, compare=False)


class JobQueue:
    """FIFO queue; one job runs at a time (frames inside a job may parallelize)."""

    def __init__(self):
        self._jobs: list[AnalysisJob] = []
        self._lock = threading.Lock()
        self.log: list[str] = []

    def submit(self, job: AnalysisJob) -> AnalysisJob:
        with self._lock:
            self._jobs.append(job)
        return job

    def pending(self) -> list[AnalysisJob]:
        return [j for j in self._jobs if j.status == "queued"]

    def get(self, job_id: str) -> AnalysisJob | None:
        for j in self._jobs:
            if j.job_id == job_id:
                return j
        return None

    def run_next(self) -> AnalysisJob | None:
        with self._lock:
            job = next((j for j in self._jobs if j.status == "queued"), None)
            if job is None:
                return None
            job.status = "running"
        try:
            run_job(job)
            job.status = "done"
        except Exception as exc:  # job errors are recorded, not raised
            job.status = "failed"
            job.error = f"{type(exc).__name__}: {exc}"
        if job.on_complete is not None:
            try:
                job.on_complete(job)
            except Exception as exc:
                job.error = (job.error or "") + f" on_complete: {exc}"
        self.log.append(f"{job.job_id}:{job.status}")
        return job

    def run_all(self) -> list[AnalysisJob]:
        done = []
        while True:
            job = self.run_next()
            if job is None:
                return done
            done.append(job)


def run_job(job: AnalysisJob) -> PipelineResult:
    pullback = container.load_pullback(job.pullback_path)
    probs = None
    if job.config.section("plaque")["provider"] == "external":
        probs = container.load_probs(job.pullback_path, pullback)

    def progress(stage: str, frac: float):
        job.stage = stage
        job.progress = frac

    result = run_pipeline(pullback, job.config, external_probs=probs, progress=progress)
    export_artifacts(result, Path(job.out_dir))
    job.timings = result.timings
    job.result = result
    return result


def _resolve_workers(config: PipelineConfig) -> int:
    w = config.workers
    return w if w > 0 else (os.cpu_count() or 1)


def _frame_map(fn, n: int, workers: int, progress=None, stage: str = ""):
    """Ordered per-frame map, threaded when more than one worker is available."""
    if workers <= 1:
        out = []
        for i in range(n):
            out.append(fn(i))
            if progress and (i % 16 == 0 or i == n - 1):
                progress(stage, (i + 1) / n)
        return out
    with ThreadPoolExecutor(max_workers=workers) as ex:
        out = list(ex.map(fn, range(n)))
    if progress:
        progress(stage, 1.0)
    return out


def run_pipeline(
    pullback: Pullback,
    config: PipelineConfig | None = None,
    *,
    external_probs: np.ndarray | None = None,
    models: tuple[stent.TrainedModel, stent.TrainedModel] | None = None,
    progress=None,
) -> PipelineResult:
    """Analyze one pullback in memory (ROI applied up front)."""
    config = config or load_config()
    workers = _resolve_workers(config)
    roi = config.roi
    offset = 0
    if roi is not None:
        a, b = roi
        b = min(b, pullback.n_frames - 1)
        pullback = Pullback(pixels=pullback.pixels[a:b + 1],
                            calibration=pullback.calibration, id=pullback.id)
        if external_probs is not None:
            external_probs = external_probs[a:b + 1]
        offset = a
    timings: dict[str, float] = {}
    pp = config.section("preprocess")

    t0 = time.perf_counter()
    imap = preprocess.accumulate_intensity(pullback)
    try:
        band = preprocess.detect_guidewire(
            imap,
            jump=pp["guidewire_jump_alines"],
            window=pp["guidewire_edge_window"],
            floor=pp["guidewire_floor"],
            darkness_max=pp["guidewire_darkness_max"],
        )
    except NoShadowFound:
        band = None
    band_masks = band.aline_mask(pullback.n_alines) if band is not None else None

    def _segment(f: int):
        mask = band_masks[f] if band_masks is not None else None
        try:
            return preprocess.segment_lumen_frame(
                pullback.pixels[f], mask,
                jump=pp["lumen_jump_px"], sigma=pp["lumen_sigma"],
                baseline=pp["lumen_gradient_baseline_px"],
                r_min=pp["lumen_r_min_px"], min_score=pp["lumen_min_score"])
        except OctopusError:
            return None

    contours = _frame_map(_segment, pullback.n_frames, workers, progress, "lumen")
    failed = [f for f, c in enumerate(contours) if c is None]
    patches, shifts = preprocess.shifted_patches(
        pullback, contours, depth_px=pp["patch_depth_px"], sigma=pp["patch_sigma"])
    timings["preprocess"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pq = config.section("plaque")
    if external_probs is not None:
        segmenter = plaque.ExternalSegmenter(external_probs, shifts, pp["patch_depth_px"])
    else:
        segmenter = plaque.ReferenceSegmenter(
            low_frac=pq["low_frac"], min_component_px=pq["min_component_px"],
            shadow_floor=pq["shadow_floor"])

    def _score(f: int):
        p = segmenter.probabilities(patches[f], f)
        return p, plaque.gate_score_from_probs(p, pq["gate_aline_prob"])

    scored = _frame_map(_score, pullback.n_frames, workers, progress, "plaque")
    probs = [s[0] for s in scored]
    scores = np.array([s[1] for s in scored])
    gate = plaque.gate_frames(scores, pq["gate_threshold"])

    labels = np.zeros(pullback.pixels.shape, dtype=np.uint8)
    lumen_structure = plaque.disk_structure(2)  # opening kernel 5
    for f, c in enumerate(contours):
        if c is not None:
            mask = preprocess.lumen_mask_from_contour(c, pullback.n_r)
            labels[f][binary_opening(mask, structure=lumen_structure)] = LABEL_LUMEN
    labels = preprocess.mask_guidewire(labels, band)
    labels = plaque.postprocess_labels(
        probs, gate, pq["prob_threshold"], shifts, labels,
        island_radius=pq["island_radius_px"])
    timings["plaque"] = time.perf_counter() - t0

    strut_records: list[stent.StrutRecord] = []
    stent_contours: dict[int, Contour] = {}
    stent_summary: dict = {}
    if config.mode == "stent_analysis":
        t0 = time.perf_counter()
        sq = config.section("stent")
        if models is None:
            if sq["model_path"]:
                base = Path(sq["model_path"])
                models = (stent.load_model(base / "detector.octm"),
                          stent.load_model(base / "coverage.octm"))
            else:
                models = build_default_models(sq["model_seed"])
        params = stent.StentParams(
            peak_frac=sq["peak_frac"], shadow_ratio=sq["shadow_ratio"],
            search_in_px=sq["search_in_px"], search_out_px=sq["search_out_px"],
            shadow_window_px=sq["shadow_window_px"],
            score_threshold=sq["score_threshold"],
            strut_thickness_um=sq["strut_thickness_um"],
            malapposition_margin_um=sq["malapposition_margin_um"])
        strut_records, stent_contours = stent.analyze_stent(
            pullback, contours, band_masks, models[0], models[1], params)
        stent_summary = stent.summarize_stent(strut_records, pullback.calibration)
        timings["stent"] = time.perf_counter() - t0
        if progress:
            progress("stent", 1.0)

    t0 = time.perf_counter()
    cal = pullback.calibration
    flags_base = ("guidewire_interpolated",) if band is not None else ()
    frame_quants = []
    for f in range(pullback.n_frames):
        c = contours[f]
        if c is None:
            frame_quants.append(quant.FrameQuant(
                frame=f + offset, lumen_area_mm2=math.nan, diam_max_mm=math.nan,
                diam_min_mm=math.nan, diam_mean_mm=math.nan, calc_angle_deg=0.0,
                calc_max_thickness_mm=math.nan, calc_min_depth_mm=math.nan,
                gated=bool(gate.gated[f]), flags=("segmentation_failed",)))
            continue
        fq = quant.frame_quant(f + offset, labels[f], c, cal,
                               gated=bool(gate.gated[f]), flags=flags_base)
        frame_quants.append(fq)
    qq = config.section("quant")
    valid = [fq for fq in frame_quants if "segmentation_failed" not in fq.flags]
    gated_valid = np.array([fq.gated for fq in valid], dtype=bool)
    lesions = quant.lesion_quant(
        valid, gated_valid, cal,
        angle_thr_deg=qq["score_angle_deg"], length_thr_mm=qq["score_length_mm"],
        thickness_thr_mm=qq["score_thickness_mm"])
    timings["quant"] = time.perf_counter() - t0
    if progress:
        progress("quant", 1.0)

    return PipelineResult(
        pullback_id=pullback.id, frame_offset=offset, calibration=cal, labels=labels,
        contours=contours, band=band, gate=gate, frame_quants=frame_quants,
        lesions=lesions, strut_records=strut_records,
        stent_contours=stent_contours, stent_summary=stent_summary,
        failed_frames=[f + offset for f in failed], timings=timings,
        provider=getattr(segmenter, "name", "reference"),
    )


def _fmt(v: float) -> str:
    return "" if (isinstance(v, float) and math.isnan(v)) else f"{v:.6f}"


QUANT_CSV_HEADER = ("frame,lumen_area_mm2,diam_max_mm,diam_min_mm,diam_mean_mm,"
                    "calc_angle_deg,calc_thick_mm,calc_depth_mm,gated,flags")


def quant_csv_text(frame_quants: list[quant.FrameQuant]) -> str:
    lines = [QUANT_CSV_HEADER]
    for q in frame_quants:
        lines.append(",".join([
            str(q.frame), _fmt(q.lumen_area_mm2), _fmt(q.diam_max_mm),
            _fmt(q.diam_min_mm), _fmt(q.diam_mean_mm), _fmt(q.calc_angle_deg),
            _fmt(q.calc_max_thickness_mm), _fmt(q.calc_min_depth_mm),
            str(int(q.gated)), ";".join(q.flags),
        ]))
    return "\n".join(lines) + "\n"


def lesion_csv_text(lesions: list[quant.LesionQuant]) -> str:
    lines = ["lesion,frame_start,frame_end,length_mm,max_angle_deg,"
             "max_thickness_mm,min_depth_mm,score"]
    for k, l in enumerate(lesions):
        lines.append(",".join([
            str(k), str(l.frame_start), str(l.frame_end), _fmt(l.length_mm),
            _fmt(l.max_angle_deg), _fmt(l.max_thickness_mm), _fmt(l.min_depth_mm),
            str(l.score),
        ]))
    return "\n".join(lines) + "\n"


def stent_csv_text(records: list[stent.StrutRecord]) -> str:
    lines = ["frame,aline,radius_px,bloom_extent_px,shadow_width_alines,score,"
             "covered,coverage_um,malapposition_um,malapposed"]
    for r in records:
        lines.append(",".join([
            str(r.frame), str(r.aline), _fmt(r.radius_px), _fmt(r.bloom_extent_px),
            str(r.shadow_width_alines), _fmt(r.score), str(int(r.covered)),
            _fmt(r.coverage_um), _fmt(r.malapposition_um), str(int(r.malapposed)),
        ]))
    return "\n".join(lines) + "\n"


def _enface_png(values: np.ndarray, vmax: float, path: Path) -> None:
    scaled = np.clip(np.nan_to_num(values, nan=0.0) / vmax, 0.0, 1.0)
    Image.fromarray((scaled * 255).astype(np.uint8), mode="L").save(path)


def export_artifacts(result: PipelineResult, out_dir: Path) -> dict[str, str]:
    """Write labels, CSVs, en face maps, and the run report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    container.save_labels(result.labels, out_dir)
    (out_dir / "quant_frames.csv").write_text(
        quant_csv_text(result.frame_quants), encoding="utf-8")
    (out_dir / "quant_lesions.csv").write_text(
        lesion_csv_text(result.lesions), encoding="utf-8")
    artifacts = {
        "labels": "labels.raw",
        "quant_frames": "quant_frames.csv",
        "quant_lesions": "quant_lesions.csv",
    }
    if result.strut_records or result.stent_summary:
        (out_dir / "stent_report.csv").write_text(
            stent_csv_text(result.strut_records), encoding="utf-8")
        (out_dir / "stent_summary.json").write_text(
            json.dumps(result.stent_summary, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
        contours_doc = {str(f + result.frame_offset): [round(float(r), 2) for r in c.radii]
                        for f, c in sorted(result.stent_contours.items())}
        (out_dir / "stent_contours.json").write_text(
            json.dumps(contours_doc) + "\n", encoding="utf-8")
        artifacts["stent_report"] = "stent_report.csv"
        artifacts["stent_summary"] = "stent_summary.json"
        artifacts["stent_contours"] = "stent_contours.json"

    contours_safe = [c if c is not None else Contour(radii=np.zeros(result.labels.shape[1]))
                     for c in result.contours]
    maps = quant.enface_maps(result.labels, contours_safe, result.calibration,
                             angular_bins=360)
    _enface_png(maps.presence.astype(np.float64), 1.0, out_dir / "enface_angle.png")
    _enface_png(maps.thickness_mm, 1.5, out_dir / "enface_thickness.png")
    _enface_png(maps.depth_mm, 1.0, out_dir / "enface_depth.png")
    artifacts.update({
        "enface_angle": "enface_angle.png",
        "enface_thickness": "enface_thickness.png",
        "enface_depth": "enface_depth.png",
    })

    report = {
        "pullback_id": result.pullback_id,
        "frame_offset": result.frame_offset,
        "n_frames": int(result.labels.shape[0]),
        "provider": result.provider,
        "failed_frames": result.failed_frames,
        "band_present": result.band is not None,
        "timings_s": {k: round(v, 4) for k, v in result.timings.items()},
        "lesions": [
            {"frame_start": l.frame_start, "frame_end": l.frame_end,
             "length_mm": l.length_mm, "max_angle_deg": l.max_angle_deg,
             "max_thickness_mm": None if math.isnan(l.max_thickness_mm)
             else l.max_thickness_mm,
             "min_depth_mm": None if math.isnan(l.min_depth_mm) else l.min_depth_mm,
             "score": l.score}
            for l in result.lesions
        ],
        "stent_summary": result.stent_summary or None,
    }
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts["report"] = "report.json"
    result.artifacts = artifacts
    return artifacts
