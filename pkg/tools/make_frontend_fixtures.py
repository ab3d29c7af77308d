"""Generate the fixtures the browser UI tests verify against.

The UI must reproduce server-side rasterization byte-exactly and use the
same measurement formulas, so both sides test against these committed files.
Run from the repository root:

    python tools/make_frontend_fixtures.py
"""

import base64
import json
from pathlib import Path

import numpy as np

from octopus import phantom, quant, raster, registration
from octopus.model import Calibration
from octopus.phantom import CalciumLesionSpec, LumenSpec, PhantomSpec

OUT = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(arr.astype(np.uint8).tobytes()).decode("ascii")


def raster_fixtures() -> dict:
    shape = (40, 60)
    strokes = [
        {"name": "brush_point", "stroke": {"tool": "brush", "cls": 2,
                                           "points": [[20, 30]], "radius": 3}},
        {"name": "brush_line", "stroke": {"tool": "brush", "cls": 1,
                                          "points": [[5, 5], [18, 40], [30, 12]],
                                          "radius": 2}},
        {"name": "brush_edge_clip", "stroke": {"tool": "brush", "cls": 4,
                                               "points": [[0, 0], [0, 59]],
                                               "radius": 2}},
        {"name": "freehand_square", "stroke": {"tool": "freehand", "cls": 3,
                                               "points": [[6, 6], [6, 25],
                                                          [20, 25], [20, 6]]}},
        {"name": "freehand_concave", "stroke": {
            "tool": "freehand", "cls": 2,
            "points": [[4.0, 4.0], [4.0, 50.0], [30.0, 50.0], [30.0, 30.0],
                       [12.0, 30.0], [12.0, 20.0], [30.0, 20.0], [30.0, 4.0]]}},
        {"name": "freehand_float_vertices", "stroke": {
            "tool": "freehand", "cls": 1,
            "points": [[10.5, 9.25], [11.75, 40.5], [33.2, 35.0], [28.0, 8.4]]}},
    ]
    cases = []
    for case in strokes:
        before = np.zeros(shape, dtype=np.uint8)
        after = raster.apply_stroke(before, case["stroke"])
        cases.append({"name": case["name"], "shape": list(shape),
                      "stroke": case["stroke"], "after_b64": _b64(after)})
    # a fill case over a prepared scene
    before = np.zeros(shape, dtype=np.uint8)
    before = raster.apply_freehand(before, 2, [(8, 8), (8, 40), (30, 40), (30, 8)])
    fill_stroke = {"tool": "fill", "cls": 5, "points": [[15, 20]]}
    after = raster.apply_stroke(before, fill_stroke)
    cases.append({"name": "fill_region", "shape": list(shape),
                  "before_b64": _b64(before), "stroke": fill_stroke,
                  "after_b64": _b64(after)})
    # a scripted multi-stroke editing session (the round-trip fixture)
    labels = np.zeros(shape, dtype=np.uint8)
    script = [
        {"tool": "brush", "cls": 1, "points": [[10, 10], [14, 30]], "radius": 2},
        {"tool": "freehand", "cls": 2, "points": [[20, 15], [20, 45],
                                                  [35, 45], [35, 15]]},
        {"tool": "brush", "cls": 0, "points": [[25, 30]], "radius": 3},
        {"tool": "fill", "cls": 4, "points": [[0, 59]]},
    ]
    for stroke in script:
        labels = raster.apply_stroke(labels, stroke)
    cases.append({"name": "scripted_session", "shape": list(shape),
                  "script": script, "after_b64": _b64(labels)})
    return {"cases": cases}


def measure_fixtures() -> dict:
    cal = Calibration()
    cases = []
    for p1, p2, vertex in [((1, 0), (0, 1), (0, 0)),
                           ((10, 5), (2, 14), (4, 4)),
                           ((-3, -3), (5, -1), (1, 1))]:
        cases.append({"kind": "angle", "p1": list(p1), "p2": list(p2),
                      "vertex": list(vertex),
                      "expected_deg": quant.measure_angle_deg(p1, p2, vertex)})
    for p1, p2 in [((0, 0), (100, 0)), ((3, 4), (33, 44)), ((-10, 2), (14, -5))]:
        cases.append({"kind": "length", "p1": list(p1), "p2": list(p2),
                      "r_pixel_um": cal.r_pixel_um,
                      "expected_mm": quant.measure_length_mm(p1, p2, cal)})
    for a, b in [(10, 20), (5, 5), (40, 12)]:
        cases.append({"kind": "span", "frame_a": a, "frame_b": b,
                      "frame_spacing_mm": cal.frame_spacing_mm,
                      "expected_mm": quant.measure_span_mm(a, b, cal)})
    return {"cases": cases}


def sync_fixture() -> dict:
    """Phantom pair registered by the production path; lesion centers per frame."""
    lesions = (CalciumLesionSpec(12, 40, angle_deg=100, arc_deg=120,
                                 depth_mm=0.05, thickness_mm=0.7),
               CalciumLesionSpec(55, 75, angle_deg=260, arc_deg=80,
                                 depth_mm=0.1, thickness_mm=0.5))
    spec = PhantomSpec(n_frames=90, n_alines=120, n_r=560,
                       lumen=LumenSpec(radius_mm=0.95), guidewire=None,
                       lesions=lesions, noise=0.0)
    _, truth_ref = phantom.generate(spec, 901)
    cal = Calibration()
    offset = 11
    pullback_float, _ = phantom.generate(spec, 902)
    pullback_float = phantom.perturb(pullback_float, "frame_shift", offset)
    labels_float = np.zeros_like(truth_ref.labels)
    labels_float[offset:] = truth_ref.labels[:len(labels_float) - offset]
    sig_ref = registration.thickness_signal(truth_ref.labels, cal, "ref")
    sig_float = registration.thickness_signal(labels_float, cal, "float")
    result = registration.register_auto(sig_ref, sig_float, max_offset=30)
    assert result.offset_frames == offset

    def centers(labels):
        out = []
        for f in range(labels.shape[0]):
            frames = np.flatnonzero((labels[f] == 2).any(axis=1))
            out.append(int(frames.mean()) if frames.size else -1)
        return out

    lesion_frames_ref = [f for f in range(spec.n_frames)
                         if (truth_ref.labels[f] == 2).any()]
    lesion_frames_float = [f for f in range(spec.n_frames)
                           if (labels_float[f] == 2).any()]
    return {
        "n_frames_ref": spec.n_frames,
        "n_frames_float": spec.n_frames,
        "offset_frames": result.offset_frames,
        "peak_correlation": result.peak_correlation,
        "lesion_frames_ref": lesion_frames_ref,
        "lesion_frames_float": lesion_frames_float,
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "raster.json").write_text(
        json.dumps(raster_fixtures(), indent=1), encoding="utf-8")
    (OUT / "measure.json").write_text(
        json.dumps(measure_fixtures(), indent=1), encoding="utf-8")
    (OUT / "sync.json").write_text(
        json.dumps(sync_fixture(), indent=1), encoding="utf-8")
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
