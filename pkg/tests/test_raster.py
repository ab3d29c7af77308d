import numpy as np
import pytest

from octopus import raster


def blank(shape=(40, 60)):
    return np.zeros(shape, dtype=np.uint8)


def test_brush_radius_one_is_line_with_caps():
    labels = raster.apply_brush(blank(), 2, [(5, 5), (5, 15)], radius=0)
    assert (labels[5, 5:16] == 2).all()
    assert labels.sum() == 2 * 11


def test_brush_disk_symmetric():
    labels = raster.apply_brush(blank(), 1, [(20, 30)], radius=3)
    ys, xs = np.nonzero(labels)
    assert ys.min() == 17 and ys.max() == 23
    assert xs.min() == 27 and xs.max() == 33
    # disk rule: dx^2+dy^2 <= r^2
    expected = sum(1 for dy in range(-3, 4) for dx in range(-3, 4)
                   if dx * dx + dy * dy <= 9)
    assert labels.sum() == expected


def test_brush_clipped_at_borders():
    labels = raster.apply_brush(blank((10, 10)), 3, [(0, 0)], radius=2)
    assert labels[0, 0] == 3
    assert labels.shape == (10, 10)


def test_freehand_even_odd_square():
    poly = [(5.0, 5.0), (5.0, 20.0), (15.0, 20.0), (15.0, 5.0)]
    labels = raster.apply_freehand(blank(), 2, poly)
    assert (labels[6:15, 5:20] == 2).all()
    assert labels[4, 10] == 0 and labels[16, 10] == 0


def test_freehand_hole_via_even_odd():
    outer = [(2.0, 2.0), (2.0, 30.0), (30.0, 30.0), (30.0, 2.0)]
    inner = [(10.0, 10.0), (10.0, 20.0), (20.0, 20.0), (20.0, 10.0)]
    poly = outer + [outer[0]] + [inner[0]] + inner[::-1]
    labels = raster.apply_freehand(blank(), 1, poly)
    assert labels[5, 5] == 1
    assert labels[15, 15] == 0  # interior hole stays clear


def test_fill_flood_4_connected():
    labels = blank((12, 12))
    labels[4, :] = 2  # wall splits the grid
    out = raster.apply_fill(labels, 5, (0, 0))
    assert (out[:4] == 5).all()
    assert (out[5:] == 0).all()
    assert (out[4] == 2).all()
    same = raster.apply_fill(out, 5, (0, 0))
    assert np.array_equal(same, out)


def test_apply_stroke_dispatch_and_unknown():
    labels = blank()
    out = raster.apply_stroke(labels, {"tool": "brush", "cls": 2,
                                       "points": [(3, 3)], "radius": 1})
    assert out[3, 3] == 2
    with pytest.raises(ValueError):
        raster.apply_stroke(labels, {"tool": "sparkle", "cls": 1, "points": []})


def test_strokes_do_not_mutate_input():
    labels = blank()
    raster.apply_brush(labels, 1, [(5, 5)], 2)
    raster.apply_fill(labels, 1, (0, 0))
    assert not labels.any()
