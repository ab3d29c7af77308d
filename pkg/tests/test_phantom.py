import math

import numpy as np
import pytest

from octopus import container, phantom
from octopus.errors import SpecInvalid
from octopus.model import LABEL_CALCIUM, LABEL_GUIDEWIRE, LABEL_LUMEN
from octopus.phantom import (
    CalciumLesionSpec,
    GuidewireSpec,
    LumenSpec,
    PhantomSpec,
    StrutSpec,
    generate,
    perturb,
)

from .oracle import calcium_quant_from_labels, lumen_quant_from_labels


def test_minimal_phantom_classes():
    spec = PhantomSpec(n_frames=4, n_alines=180, n_r=640,
                       lumen=LumenSpec(radius_mm=1.2), noise=0.0)
    _, truth = generate(spec, 1)
    assert set(np.unique(truth.labels)) == {0, LABEL_LUMEN, LABEL_GUIDEWIRE}


def test_same_spec_seed_is_byte_identical(tmp_path):
    spec = PhantomSpec(n_frames=6, n_alines=120, n_r=560,
                       lumen=LumenSpec(radius_mm=1.0),
                       lesions=(CalciumLesionSpec(1, 4, 90, 80, 0.1, 0.5),),
                       noise=1.0)
    pb1, t1 = generate(spec, 77)
    pb2, t2 = generate(spec, 77)
    assert np.array_equal(pb1.pixels, pb2.pixels)
    assert np.array_equal(t1.labels, t2.labels)
    container.save_pullback(pb1, tmp_path / "a")
    container.save_pullback(pb2, tmp_path / "b")
    assert (tmp_path / "a" / "frames.raw").read_bytes() == \
        (tmp_path / "b" / "frames.raw").read_bytes()
    pb3, _ = generate(spec, 78)
    assert not np.array_equal(pb1.pixels, pb3.pixels)


def test_lesion_truth_quant_matches_construction(small_phantom):
    spec, (pullback, truth) = small_phantom
    fq = truth.frame_quant[8]
    step = 360.0 / spec.n_alines
    assert fq.calc_angle_deg == pytest.approx(90.0, abs=2 * step)
    assert fq.calc_max_thickness_mm == pytest.approx(0.5, abs=0.01)
    assert fq.calc_min_depth_mm == pytest.approx(0.1, abs=0.01)
    assert fq.lumen_area_mm2 == pytest.approx(math.pi * 1.5 ** 2, rel=1e-6)
    # lesion length by construction: frames 4..11 inclusive at 0.2 mm
    gated = [f for f in range(spec.n_frames)
             if (truth.labels[f] == LABEL_CALCIUM).any()]
    assert gated == list(range(4, 12))


def test_strut_truth_records(small_phantom):
    spec, (pullback, truth) = small_phantom
    covered = next(t for t in truth.struts if t.covered)
    floating = next(t for t in truth.struts if not t.covered)
    assert covered.coverage_um == pytest.approx(80.0)
    assert covered.malapposition_um == 0.0
    assert floating.malapposition_um == pytest.approx(300.0)
    assert floating.coverage_um == 0.0


def test_truth_quant_agrees_with_label_scan_oracle(small_phantom):
    spec, (pullback, truth) = small_phantom
    mm = pullback.calibration.r_pixel_mm
    step = 360.0 / spec.n_alines
    for f in (0, 5, 8):
        oracle_lumen = lumen_quant_from_labels(truth.labels[f], mm)
        fq = truth.frame_quant[f]
        # one-pixel discretization on a ~300 px radius boundary
        assert oracle_lumen["lumen_area_mm2"] == pytest.approx(
            fq.lumen_area_mm2, rel=0.01)
        assert oracle_lumen["diam_max_mm"] == pytest.approx(fq.diam_max_mm, abs=2 * mm)
        assert oracle_lumen["diam_min_mm"] == pytest.approx(fq.diam_min_mm, abs=2 * mm)
        oracle_calc = calcium_quant_from_labels(truth.labels[f], mm)
        if math.isnan(fq.calc_max_thickness_mm):
            assert math.isnan(oracle_calc["calc_max_thickness_mm"])
        else:
            assert oracle_calc["calc_angle_deg"] == pytest.approx(
                fq.calc_angle_deg, abs=step + 1e-9)
            assert oracle_calc["calc_max_thickness_mm"] == pytest.approx(
                fq.calc_max_thickness_mm, abs=mm)
            assert oracle_calc["calc_min_depth_mm"] == pytest.approx(
                fq.calc_min_depth_mm, abs=mm)


def test_perturb_frame_shift_identity_and_roll(small_phantom):
    spec, (pullback, _) = small_phantom
    same = perturb(pullback, "frame_shift", 0)
    assert np.array_equal(same.pixels, pullback.pixels)
    shifted = perturb(pullback, "frame_shift", 3)
    assert np.array_equal(shifted.pixels[3:], pullback.pixels[:-3])
    assert not shifted.pixels[:3].any()
    rolled = perturb(pullback, "angular_roll", 10)
    assert np.array_equal(rolled.pixels, np.roll(pullback.pixels, 10, axis=1))


def test_perturb_intensity_scale_keeps_dp_contour(small_phantom):
    from octopus import preprocess

    spec, (pullback, truth) = small_phantom
    scaled = perturb(pullback, "intensity_scale", 1.3)
    band = preprocess.detect_guidewire(preprocess.accumulate_intensity(pullback))
    c1, _ = preprocess.segment_lumen_dp(pullback, band)
    c2, _ = preprocess.segment_lumen_dp(scaled, band)
    for f in range(spec.n_frames):
        assert np.max(np.abs(c1[f].radii - c2[f].radii)) <= 1.0


@pytest.mark.parametrize("mutate, field", [
    (dict(n_frames=0), "n_frames"),
    (dict(noise=3.0), "noise"),
    (dict(lumen=LumenSpec(radius_mm=5.0)), "lumen.radius_mm"),
])
def test_spec_validation_paths(mutate, field):
    base = dict(n_frames=4, n_alines=64, n_r=560, lumen=LumenSpec(radius_mm=1.0))
    base.update(mutate)
    with pytest.raises(SpecInvalid) as err:
        generate(PhantomSpec(**base), 0)
    assert err.value.field == field


def test_spec_rejects_covered_and_floating():
    spec = PhantomSpec(n_frames=4, n_alines=64, n_r=560,
                       lumen=LumenSpec(radius_mm=1.0),
                       struts=(StrutSpec(frame=1, angle_deg=0, offset_mm=0.2,
                                         coverage_mm=0.1),))
    with pytest.raises(SpecInvalid) as err:
        generate(spec, 0)
    assert "offset" in err.value.field


def test_spec_json_round_trip():
    spec = PhantomSpec(n_frames=6, n_alines=120, n_r=560,
                       lumen=LumenSpec(radius_mm=(0.8, 1.0)),
                       guidewire=GuidewireSpec(angle_deg=100, width_deg=15),
                       lesions=(CalciumLesionSpec(0, 3, 45, 60, 0.05, 0.3),),
                       struts=(StrutSpec(frame=2, angle_deg=200, coverage_mm=0.1),),
                       noise=0.5)
    import json

    round_tripped = PhantomSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    pb1, _ = generate(spec, 3)
    pb2, _ = generate(round_tripped, 3)
    assert np.array_equal(pb1.pixels, pb2.pixels)
