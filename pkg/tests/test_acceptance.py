"""Acceptance suite: every product criterion at its stated tolerance.

Each test prints one PASS/FAIL line. Tolerances are pinned here and must not
be loosened; the phantom corpus seeds are fixed so every run measures the
same instances.
"""

import math
import time

import numpy as np

from octopus import phantom, preprocess, quant, registration, stent
from octopus.config import load_config
from octopus.dp import best_cyclic_path
from octopus.errors import NoShadowFound
from octopus.model import LABEL_CALCIUM, Calibration
from octopus.modelbank import training_specs
from octopus.phantom import (
    CalciumLesionSpec,
    GuidewireSpec,
    LumenSpec,
    PhantomSpec,
    StrutSpec,
)
from octopus.pipeline import export_artifacts, run_pipeline

from .conftest import random_phantom_spec
from .oracle import (
    calcium_quant_from_labels,
    cyclic_dp_bruteforce,
    lumen_quant_from_labels,
)


def _report(name: str, ok: bool, detail: str):
    print(f"{'PASS' if ok else 'FAIL'} - {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _circ_err(a, b, n):
    return np.abs((a - b + n // 2) % n - n // 2)


# --------------------------------------------------------------------------
# Criterion 1: guidewire DP accuracy on 20 random phantoms, NoShadowFound on
# guidewire-free phantoms, and DP runtime < 50 ms at 375 frames.
# --------------------------------------------------------------------------

def test_acceptance_guidewire_dp():
    rng = np.random.default_rng(1001)
    total = within = 0
    for k in range(20):
        spec = PhantomSpec(
            n_frames=40, n_alines=504, n_r=512,
            lumen=LumenSpec(radius_mm=float(rng.uniform(0.55, 0.78)),
                            ellipticity=float(rng.uniform(1.0, 1.3))),
            guidewire=GuidewireSpec(angle_deg=float(rng.uniform(0, 360)),
                                    width_deg=float(rng.uniform(10, 26)),
                                    drift_deg=float(rng.uniform(-10, 10))),
            noise=float(rng.uniform(0, 1.0)))
        pullback, truth = phantom.generate(spec, 2000 + k)
        band = preprocess.detect_guidewire(preprocess.accumulate_intensity(pullback))
        lo = _circ_err(band.lower, truth.band_lower, 504)
        up = _circ_err(band.upper, truth.band_upper, 504)
        within += int(np.sum((lo <= 2) & (up <= 2)))
        total += spec.n_frames
    frac = within / total
    no_shadow_ok = True
    for noise in (0.3, 1.0):
        spec = PhantomSpec(n_frames=40, n_alines=504, n_r=512,
                           lumen=LumenSpec(radius_mm=0.8, ellipticity=1.2),
                           guidewire=None, noise=noise)
        pullback, _ = phantom.generate(spec, 77)
        try:
            preprocess.detect_guidewire(preprocess.accumulate_intensity(pullback))
            no_shadow_ok = False
        except NoShadowFound:
            pass
    # runtime at 375 frames, DP only (map precomputed, warm call)
    spec = PhantomSpec(n_frames=375, n_alines=504, n_r=512,
                       lumen=LumenSpec(radius_mm=0.8),
                       guidewire=GuidewireSpec(angle_deg=120, width_deg=20),
                       noise=0.5)
    pullback, _ = phantom.generate(spec, 3000)
    imap = preprocess.accumulate_intensity(pullback)
    preprocess.detect_guidewire(imap)
    dt_ms = math.inf
    for _ in range(3):
        t0 = time.perf_counter()
        preprocess.detect_guidewire(imap)
        dt_ms = min(dt_ms, (time.perf_counter() - t0) * 1000)
    ok = frac >= 0.98 and no_shadow_ok and dt_ms < 50.0
    _report("guidewire DP", ok,
            f"edges within +/-2 A-lines on {100 * frac:.1f}% of frames "
            f"(need >= 98%), NoShadowFound on guidewire-free: {no_shadow_ok}, "
            f"DP runtime {dt_ms:.1f} ms at 375 frames (need < 50)")


# --------------------------------------------------------------------------
# Criterion 2: lumen DP boundary RMS <= 2 px on circular/elliptical/drifting
# phantoms; path cost equals the exhaustive cyclic optimum on 64x64 grids.
# --------------------------------------------------------------------------

def test_acceptance_lumen_dp():
    shapes = [
        ("circular", LumenSpec(radius_mm=1.2)),
        ("elliptical", LumenSpec(radius_mm=1.35, ellipticity=0.75,
                                 rotation_deg=40.0)),
        ("drifting", LumenSpec(radius_mm=(0.9, 1.4),
                               center_start_mm=(-0.25, 0.1),
                               center_end_mm=(0.3, -0.2))),
    ]
    worst = 0.0
    for noise in (0.0, 1.0):
        for name, lumen in shapes:
            spec = PhantomSpec(n_frames=10, n_alines=360, n_r=640, lumen=lumen,
                               guidewire=GuidewireSpec(angle_deg=200, width_deg=18),
                               noise=noise)
            pullback, truth = phantom.generate(spec, 4000)
            band = preprocess.detect_guidewire(
                preprocess.accumulate_intensity(pullback))
            contours, failed = preprocess.segment_lumen_dp(pullback, band)
            assert not failed
            bm = band.aline_mask(spec.n_alines)
            for f in range(spec.n_frames):
                keep = ~bm[f]
                err = contours[f].radii[keep] - truth.contours[f][keep]
                worst = max(worst, float(np.sqrt(np.mean(err ** 2))))
    rng = np.random.default_rng(1002)
    micro_ok = True
    for _ in range(8):
        score = rng.normal(size=(64, 64))
        _, total = best_cyclic_path(score, 4)
        expected = cyclic_dp_bruteforce(score, 4)
        if not math.isclose(total, expected, abs_tol=1e-9):
            micro_ok = False
    ok = worst <= 2.0 and micro_ok
    _report("lumen DP", ok,
            f"worst boundary RMS {worst:.2f} px (need <= 2), "
            f"cyclic optimum equals exhaustive oracle on all 64x64 instances: "
            f"{micro_ok}")


# --------------------------------------------------------------------------
# Criterion 3: reference calcification segmenter and frame gate at noise 1.
# --------------------------------------------------------------------------

def test_acceptance_calcification():
    rng = np.random.default_rng(1003)
    tp = fp = fn = 0
    gate_missed = gate_false = gate_true_total = gate_false_total = 0
    cfg = load_config()
    for k in range(10):
        spec = PhantomSpec(
            n_frames=40, n_alines=360, n_r=640,
            lumen=LumenSpec(radius_mm=float(rng.uniform(1.0, 1.4)),
                            ellipticity=float(rng.uniform(1.0, 1.25))),
            guidewire=GuidewireSpec(angle_deg=float(rng.uniform(0, 360)),
                                    width_deg=18),
            lesions=(
                CalciumLesionSpec(
                    frame_start=4, frame_end=int(rng.integers(18, 30)),
                    angle_deg=float(rng.uniform(0, 360)),
                    arc_deg=float(rng.uniform(45, 200)),
                    depth_mm=float(rng.uniform(0.02, 0.2)),
                    thickness_mm=float(rng.uniform(0.3, 1.0))),
            ),
            noise=1.0)
        pullback, truth = phantom.generate(spec, 5000 + k)
        result = run_pipeline(pullback, cfg)
        pred = result.labels == LABEL_CALCIUM
        true = truth.labels == LABEL_CALCIUM
        tp += int((pred & true).sum())
        fp += int((pred & ~true).sum())
        fn += int((~pred & true).sum())
        true_gate = true.any(axis=(1, 2))
        gate_missed += int(np.sum(true_gate & ~result.gate.gated))
        gate_true_total += int(true_gate.sum())
        gate_false += int(np.sum(~true_gate & result.gate.gated))
        gate_false_total += int((~true_gate).sum())
    sens = tp / (tp + fn)
    f1 = 2 * tp / (2 * tp + fp + fn)
    missed_rate = gate_missed / gate_true_total
    false_rate = gate_false / gate_false_total
    ok = sens >= 0.85 and f1 >= 0.78 and missed_rate <= 0.067 and false_rate <= 0.045
    _report("calcification segmentation", ok,
            f"pixel sensitivity {sens:.3f} (need >= 0.85), F1 {f1:.3f} "
            f"(need >= 0.78), gate missed {100 * missed_rate:.1f}% "
            f"(need <= 6.7%), gate false {100 * false_rate:.1f}% (need <= 4.5%)")


# --------------------------------------------------------------------------
# Criterion 4: stent strut detection, coverage classification, and metric
# accuracy on >= 500 held-out struts.
# --------------------------------------------------------------------------

def test_acceptance_stent(default_models):
    detector, coverage_model = default_models
    n_true = n_found = det_tp = det_fp = 0
    cov_tp = cov_fn = cov_fp = cov_tn = 0
    cov_errs = []
    mal_errs = []
    for k in range(7):
        spec = training_specs(6000 + k, n_pullbacks=1)[0]
        pullback, truth = phantom.generate(spec, 444 + k)
        band = preprocess.detect_guidewire(preprocess.accumulate_intensity(pullback))
        contours, _ = preprocess.segment_lumen_dp(pullback, band)
        bm = band.aline_mask(spec.n_alines)
        records, _ = stent.analyze_stent(pullback, contours, bm,
                                         detector, coverage_model)
        matches = stent.match_to_truth(records, truth.struts, spec.n_alines)
        matched = set()
        for r, m in zip(records, matches):
            if m >= 0:
                det_tp += 1
                matched.add(m)
                t = truth.struts[m]
                if t.covered and r.covered:
                    cov_tp += 1
                    cov_errs.append(r.coverage_um - t.coverage_um)
                elif t.covered:
                    cov_fn += 1
                elif r.covered:
                    cov_fp += 1
                else:
                    cov_tn += 1
                if t.malapposition_um > 100:
                    mal_errs.append(r.malapposition_um - t.malapposition_um)
            else:
                det_fp += 1
        n_true += len(truth.struts)
        n_found += len(matched)
    det_sens = n_found / n_true
    det_prec = det_tp / (det_tp + det_fp)
    cov_sens = cov_tp / (cov_tp + cov_fn)
    cov_spec = cov_tn / (cov_tn + cov_fp)
    cov_mean = float(np.mean(cov_errs))
    mal_mean = float(np.mean(mal_errs))
    ok = (n_true >= 500 and det_sens >= 0.90 and det_prec >= 0.90
          and cov_sens >= 0.94 and cov_spec >= 0.90
          and abs(cov_mean) <= 5.0 and abs(mal_mean) <= 10.0)
    _report("stent analysis", ok,
            f"{n_true} held-out struts (need >= 500); detector sensitivity "
            f"{det_sens:.3f} precision {det_prec:.3f} (need >= 0.90); coverage "
            f"sensitivity {cov_sens:.3f} (need >= 0.94) specificity "
            f"{cov_spec:.3f} (need >= 0.90); coverage mean error "
            f"{cov_mean:+.2f} um (need within +/-5); malapposition mean error "
            f"{mal_mean:+.2f} um (need within +/-10)")


# --------------------------------------------------------------------------
# Criterion 5: registration recovery, noise robustness, antisymmetry.
# --------------------------------------------------------------------------

def _registration_base_spec(n_frames=375):
    lesions = (
        CalciumLesionSpec(30, 80, angle_deg=60, arc_deg=120, depth_mm=0.05,
                          thickness_mm=0.8),
        CalciumLesionSpec(120, 160, angle_deg=200, arc_deg=80, depth_mm=0.1,
                          thickness_mm=0.5),
        CalciumLesionSpec(220, 300, angle_deg=300, arc_deg=160, depth_mm=0.03,
                          thickness_mm=1.0),
    )
    return PhantomSpec(n_frames=n_frames, n_alines=120, n_r=560,
                       lumen=LumenSpec(radius_mm=(0.9, 1.1)),
                       guidewire=None, lesions=lesions, noise=0.0)


def test_acceptance_registration():
    spec = _registration_base_spec()
    _, truth = phantom.generate(spec, 6001)
    cal = Calibration()
    sig = registration.thickness_signal(truth.labels, cal, "ref")
    exact_ok = True
    for k in (-100, -57, -13, 0, 13, 57, 100):
        shifted = np.zeros_like(sig.values)
        if k >= 0:
            shifted[k:] = sig.values[:len(shifted) - k] if k else sig.values
        else:
            shifted[:k] = sig.values[-k:]
        res = registration.register_auto(
            sig, registration.ThicknessSignal(values=shifted), max_offset=120)
        if res.offset_frames != k:
            exact_ok = False

    # noise trials: floating pullback re-rendered with speckle, labels from
    # the production segmentation path
    base_spec = PhantomSpec(
        n_frames=60, n_alines=96, n_r=520,
        lumen=LumenSpec(radius_mm=0.9),
        guidewire=None,
        lesions=(CalciumLesionSpec(8, 24, angle_deg=90, arc_deg=110,
                                   depth_mm=0.05, thickness_mm=0.7),
                 CalciumLesionSpec(34, 50, angle_deg=250, arc_deg=70,
                                   depth_mm=0.1, thickness_mm=0.45)),
        noise=0.0)
    _, base_truth = phantom.generate(base_spec, 6002)
    ref_sig = registration.thickness_signal(base_truth.labels, cal, "ref")
    cfg = load_config()
    rng = np.random.default_rng(1005)
    hits = 0
    antisym_ok = True
    trials = 50
    for t in range(trials):
        k = int(rng.integers(-9, 10))
        noisy_spec = PhantomSpec(
            n_frames=base_spec.n_frames, n_alines=base_spec.n_alines,
            n_r=base_spec.n_r, lumen=base_spec.lumen, guidewire=None,
            lesions=base_spec.lesions, noise=1.0)
        pullback, _ = phantom.generate(noisy_spec, 7000 + t)
        pullback = phantom.perturb(pullback, "frame_shift", k)
        result = run_pipeline(pullback, cfg)
        float_sig = registration.thickness_signal(result.labels, cal, "float")
        try:
            res = registration.register_auto(ref_sig, float_sig, max_offset=20)
        except registration.DegenerateSignal:
            continue
        if abs(res.offset_frames - k) <= 1:
            hits += 1
        rev = registration.register_auto(float_sig, ref_sig, max_offset=20)
        if res.peak_correlation > 0.99 and rev.peak_correlation > 0.99:
            if res.offset_frames != -rev.offset_frames:
                antisym_ok = False
    ok = exact_ok and hits == trials and antisym_ok
    _report("registration", ok,
            f"exact recovery of +/-100-frame shifts at noise 0: {exact_ok}; "
            f"within +/-1 frame on {hits}/{trials} noise-1 trials (need all); "
            f"antisymmetry on unique peaks: {antisym_ok}")


# --------------------------------------------------------------------------
# Criterion 6: quantification equals the brute-force label-scan oracle on 100
# randomized phantoms; analytic circle/ellipse areas within 0.5%.
# --------------------------------------------------------------------------

def test_acceptance_quant_oracle():
    rng = np.random.default_rng(1006)
    cal = Calibration()
    mm = cal.r_pixel_mm
    worst = {"area_rel": 0.0, "diam_px": 0.0, "angle_alines": 0.0,
             "thick_px": 0.0, "depth_px": 0.0, "length_frames": 0.0}
    for k in range(100):
        spec = random_phantom_spec(rng)
        _, truth = phantom.generate(spec, 8000 + k)
        step = 360.0 / spec.n_alines
        gated_true = []
        for f in range(spec.n_frames):
            contour = quant.contour_from_labels(truth.labels[f])
            prod_l = quant.lumen_quant(contour, cal)
            orac_l = lumen_quant_from_labels(truth.labels[f], mm)
            worst["area_rel"] = max(worst["area_rel"], abs(
                prod_l["lumen_area_mm2"] - orac_l["lumen_area_mm2"])
                / orac_l["lumen_area_mm2"])
            for key in ("diam_max_mm", "diam_min_mm", "diam_mean_mm"):
                worst["diam_px"] = max(worst["diam_px"],
                                       abs(prod_l[key] - orac_l[key]) / mm)
            prod_c = quant.calcium_quant(truth.labels[f], contour, cal)
            orac_c = calcium_quant_from_labels(truth.labels[f], mm)
            worst["angle_alines"] = max(worst["angle_alines"], abs(
                prod_c["calc_angle_deg"] - orac_c["calc_angle_deg"]) / step)
            if not math.isnan(prod_c["calc_max_thickness_mm"]):
                worst["thick_px"] = max(worst["thick_px"], abs(
                    prod_c["calc_max_thickness_mm"]
                    - orac_c["calc_max_thickness_mm"]) / mm)
                worst["depth_px"] = max(worst["depth_px"], abs(
                    prod_c["calc_min_depth_mm"] - orac_c["calc_min_depth_mm"]) / mm)
            gated_true.append(bool((truth.labels[f] == LABEL_CALCIUM).any()))
        # lesion runs against a naive run-length scan of the same gate
        quants = [quant.frame_quant(f, truth.labels[f],
                                    quant.contour_from_labels(truth.labels[f]),
                                    cal, gated=gated_true[f])
                  for f in range(spec.n_frames)]
        lesions = quant.lesion_quant(quants, np.array(gated_true), cal)
        naive_runs = []
        run = 0
        for f, g in enumerate(gated_true + [False]):
            if g:
                run += 1
            elif run:
                naive_runs.append(run)
                run = 0
        assert len(lesions) == len(naive_runs)
        for lesion, n_frames_run in zip(lesions, naive_runs):
            worst["length_frames"] = max(worst["length_frames"], abs(
                lesion.length_mm - n_frames_run * cal.frame_spacing_mm)
                / cal.frame_spacing_mm)
    circle = quant.lumen_quant(
        quant.Contour(radii=np.full(504, 300.0)), cal)["lumen_area_mm2"]
    circle_err = abs(circle - math.pi * 1.5 ** 2) / (math.pi * 1.5 ** 2)
    spec_e = PhantomSpec(n_frames=1, n_alines=504, n_r=700,
                         lumen=LumenSpec(radius_mm=1.8, ellipticity=1.2 / 1.8,
                                         rotation_deg=25.0),
                         guidewire=None, noise=0.0)
    _, truth_e = phantom.generate(spec_e, 17)
    ellipse = quant.lumen_quant(truth_e.contour(0), cal)["lumen_area_mm2"]
    ellipse_err = abs(ellipse - math.pi * 1.2 * 1.8) / (math.pi * 1.2 * 1.8)
    ok = (worst["area_rel"] <= 0.01 and worst["diam_px"] <= 2.0
          and worst["angle_alines"] <= 1.0 + 1e-9 and worst["thick_px"] <= 1.0
          and worst["depth_px"] <= 1.0 and worst["length_frames"] <= 1e-9
          and circle_err <= 0.005 and ellipse_err <= 0.005)
    _report("quantification oracle equality", ok,
            f"100 phantoms: worst area dev {100 * worst['area_rel']:.2f}% "
            f"(<= 1%), diam {worst['diam_px']:.2f} px (<= 2), angle "
            f"{worst['angle_alines']:.2f} A-lines (<= 1), thickness "
            f"{worst['thick_px']:.2f} px (<= 1), depth {worst['depth_px']:.2f} px "
            f"(<= 1), lesion length exact: {worst['length_frames'] == 0.0}; "
            f"circle area err {100 * circle_err:.3f}% and ellipse "
            f"{100 * ellipse_err:.3f}% (<= 0.5%)")


# --------------------------------------------------------------------------
# Criterion 7: throughput on a 375-frame full-size phantom.
# --------------------------------------------------------------------------

def test_acceptance_throughput(default_models):
    rng = np.random.default_rng(1007)
    struts = []
    for f in range(150, 300, 3):
        base = float(rng.uniform(0, 360))
        for j in range(8):
            struts.append(StrutSpec(frame=f, angle_deg=(base + 45.0 * j) % 360,
                                    coverage_mm=float(rng.uniform(0.05, 0.2))))
    spec = PhantomSpec(
        n_frames=375, n_alines=504, n_r=976,
        lumen=LumenSpec(radius_mm=(1.3, 1.6)),
        guidewire=GuidewireSpec(angle_deg=210, width_deg=20),
        lesions=(CalciumLesionSpec(40, 130, angle_deg=90, arc_deg=140,
                                   depth_mm=0.05, thickness_mm=0.8),),
        struts=tuple(struts), noise=1.0)
    pullback, _ = phantom.generate(spec, 9001)
    cfg = load_config({"mode": "stent_analysis"})
    t0 = time.perf_counter()
    result = run_pipeline(pullback, cfg, models=default_models)
    elapsed = time.perf_counter() - t0
    per_frame = elapsed / spec.n_frames
    ok = per_frame <= 0.6 and elapsed <= 240.0
    _report("throughput", ok,
            f"full pipeline {elapsed:.1f} s for 375 frames = "
            f"{per_frame * 1000:.0f} ms/frame (need <= 600 ms/frame and "
            f"<= 240 s total); struts found: {len(result.strut_records)}")


# --------------------------------------------------------------------------
# Criterion 8: determinism - byte-identical labels and CSVs across runs.
# --------------------------------------------------------------------------

def test_acceptance_determinism(tmp_path, default_models):
    spec = PhantomSpec(
        n_frames=40, n_alines=504, n_r=976,
        lumen=LumenSpec(radius_mm=1.4, ellipticity=1.1),
        guidewire=GuidewireSpec(angle_deg=150, width_deg=20),
        lesions=(CalciumLesionSpec(5, 25, angle_deg=80, arc_deg=120,
                                   depth_mm=0.06, thickness_mm=0.7),),
        struts=tuple(StrutSpec(frame=f, angle_deg=a, coverage_mm=0.1)
                     for f in (28, 32) for a in (0, 72, 144, 216, 288)),
        noise=1.0)
    pullback, _ = phantom.generate(spec, 9002)
    cfg = load_config({"mode": "stent_analysis"})
    digests = []
    for run in ("a", "b"):
        result = run_pipeline(pullback, cfg, models=default_models)
        out = tmp_path / run
        export_artifacts(result, out)
        digests.append({
            name: (out / name).read_bytes()
            for name in ("labels.raw", "quant_frames.csv", "quant_lesions.csv",
                         "stent_report.csv")
        })
    ok = all(digests[0][name] == digests[1][name] for name in digests[0])
    _report("determinism", ok,
            "two identical runs produce byte-identical labels.raw, "
            "quant_frames.csv, quant_lesions.csv, stent_report.csv: "
            f"{ok}")
