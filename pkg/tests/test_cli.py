import json

import pytest

from octopus import container
from octopus.cli import main


@pytest.fixture()
def phantom_spec_file(tmp_path):
    spec = {
        "n_frames": 12, "n_alines": 120, "n_r": 560,
        "lumen": {"radius_mm": 1.0},
        "guidewire": {"angle_deg": 200.0, "width_deg": 20.0},
        "lesions": [{"frame_start": 3, "frame_end": 9, "angle_deg": 90.0,
                     "arc_deg": 90.0, "depth_mm": 0.1, "thickness_mm": 0.5}],
        "struts": [],
        "noise": 0.3,
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return path


def test_phantom_analyze_report_register_flow(tmp_path, phantom_spec_file, capsys):
    pb_dir = tmp_path / "pb"
    assert main(["phantom", "--spec", str(phantom_spec_file), "--seed", "5",
                 "--out", str(pb_dir)]) == 0
    assert (pb_dir / "frames.raw").is_file()
    assert (pb_dir / "labels.raw").is_file()
    truth = json.loads((pb_dir / "truth.json").read_text())
    assert truth["seed"] == 5
    assert len(truth["frame_quant"]) == 12

    assert main(["analyze", str(pb_dir), "--roi", "2:9"]) == 0
    out = pb_dir / "analysis"
    assert (out / "quant_frames.csv").is_file()
    rows = (out / "quant_frames.csv").read_text().strip().split("\n")
    assert len(rows) == 8 + 1  # ROI rows only

    assert main(["report", str(pb_dir), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "quant_lesions.csv").is_file()

    pb2 = tmp_path / "pb2"
    assert main(["phantom", "--spec", str(phantom_spec_file), "--seed", "6",
                 "--out", str(pb2)]) == 0
    reg_out = tmp_path / "reg.json"
    code = main(["register", "--ref", str(pb_dir), "--float", str(pb2),
                 "--max-offset", "4", "--min-overlap", "6", "--out", str(reg_out)])
    assert code == 0
    assert abs(json.loads(reg_out.read_text())["offset_frames"]) <= 4
    code = main(["register", "--ref", str(pb_dir), "--float", str(pb2),
                 "--landmarks", "2,9:4,11", "--out", str(reg_out)])
    assert code == 0
    assert json.loads(reg_out.read_text())["offset_frames"] == 2


def test_exit_codes(tmp_path, phantom_spec_file):
    assert main(["analyze", str(tmp_path / "missing")]) == 2
    bad_spec = tmp_path / "bad.json"
    bad_spec.write_text(json.dumps({"n_frames": 0}))
    assert main(["phantom", "--spec", str(bad_spec), "--seed", "1",
                 "--out", str(tmp_path / "x")]) == 2
    # valid container but broken config
    pb_dir = tmp_path / "pb"
    main(["phantom", "--spec", str(phantom_spec_file), "--seed", "5",
          "--out", str(pb_dir)])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": True}))
    assert main(["analyze", str(pb_dir), "--config", str(cfg)]) == 2


def test_register_degenerate_exit_code(tmp_path, phantom_spec_file):
    spec = json.loads(phantom_spec_file.read_text())
    spec["lesions"] = []
    empty = tmp_path / "empty_spec.json"
    empty.write_text(json.dumps(spec))
    a, b = tmp_path / "a", tmp_path / "b"
    main(["phantom", "--spec", str(empty), "--seed", "1", "--out", str(a)])
    main(["phantom", "--spec", str(empty), "--seed", "2", "--out", str(b)])
    assert main(["register", "--ref", str(a), "--float", str(b),
                 "--out", str(tmp_path / "r.json")]) == 3
