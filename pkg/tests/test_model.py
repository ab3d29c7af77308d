import numpy as np
import pytest

from octopus import phantom
from octopus.errors import OffsetOutOfRange
from octopus.model import (
    LABEL_LUMEN,
    Calibration,
    PolarFrame,
    Pullback,
    apply_z_offset,
    cartesian_to_polar,
    crop_depth,
    polar_to_cartesian,
)
from octopus.phantom import LumenSpec, PhantomSpec


def _dice(a, b):
    inter = np.logical_and(a, b).sum()
    return 2.0 * inter / (a.sum() + b.sum())


def make_pullback(pixels):
    return Pullback(pixels=pixels.astype(np.uint16), calibration=Calibration(), id="t")


def test_uniform_polar_maps_to_uniform_disk():
    frame = PolarFrame(np.full((64, 300), 1000, dtype=np.uint16), 0)
    img = polar_to_cartesian(frame, Calibration(), 640)
    center = (640 - 1) / 2
    ys, xs = np.mgrid[0:640, 0:640]
    r = np.hypot(xs - center, ys - center)
    inside = r < 290
    outside = r > 310
    assert np.all(img[inside] == 1000)
    assert np.all(img[outside] == 0)


def test_single_bright_aline_maps_to_positive_x_ray():
    pixels = np.zeros((90, 300), dtype=np.uint16)
    pixels[0, :] = 60000
    img = polar_to_cartesian(PolarFrame(pixels, 0), Calibration(), 600)
    center = (600 - 1) // 2
    # along +x the ray is bright, along -x it is dark
    assert img[center, center + 50:center + 250].mean() > 20000
    assert img[center, 50:center - 50].mean() < 500


def test_phantom_lumen_circle_dice():
    spec = PhantomSpec(n_frames=1, n_alines=360, n_r=700,
                       lumen=LumenSpec(radius_mm=1.5), guidewire=None, noise=0.0)
    pullback, truth = phantom.generate(spec, 9)
    lumen_mask = (truth.labels[0] == LABEL_LUMEN).astype(np.uint8)
    cart = polar_to_cartesian(lumen_mask, pullback.calibration, 700, is_labels=True)
    center = (700 - 1) / 2
    ys, xs = np.mgrid[0:700, 0:700]
    disk = np.hypot(xs - center, ys - center) < 300.0  # 1.5 mm at 5 um/px
    assert _dice(cart > 0, disk) >= 0.99


def test_round_trip_preserves_mean_and_mask(small_phantom):
    spec, (pullback, truth) = small_phantom
    cal = pullback.calibration
    frame = pullback.pixels[5]
    cart = polar_to_cartesian(frame, cal, 2 * pullback.n_r)
    back = cartesian_to_polar(cart, cal, pullback.n_alines, pullback.n_r)
    assert abs(float(back.mean()) - float(frame.mean())) / float(frame.mean()) < 0.01
    lum = (truth.labels[5] == LABEL_LUMEN).astype(np.uint8)
    cart_l = polar_to_cartesian(lum, cal, 2 * pullback.n_r, is_labels=True)
    back_l = cartesian_to_polar(cart_l, cal, pullback.n_alines, pullback.n_r,
                                is_labels=True)
    assert _dice(back_l > 0, lum > 0) >= 0.98


def test_rotation_equivariance(small_phantom):
    spec, (pullback, truth) = small_phantom
    cal = pullback.calibration
    mask = (truth.labels[4] == 2).astype(np.uint8)  # calcium mask, asymmetric
    k = pullback.n_alines // 4  # 90 degrees
    rot_polar = np.roll(mask, k, axis=0)
    img1 = polar_to_cartesian(mask, cal, 600, is_labels=True)
    img2 = polar_to_cartesian(rot_polar, cal, 600, is_labels=True)
    # rotating by 90 deg in polar equals rotating the cartesian image; with
    # the (x, y) = (r cos, r sin) convention and row-major display, +theta
    # rotation maps to np.rot90 with axes flipped
    img1_rot = np.rot90(img1, k=-1).T
    img2_t = img2.T
    inter = np.logical_and(img1_rot > 0, img2_t > 0).sum()
    union = max((img1_rot > 0).sum(), (img2_t > 0).sum())
    assert inter / union > 0.97


def test_apply_z_offset_identity_and_inverse():
    rng = np.random.default_rng(3)
    pixels = rng.integers(0, 65535, size=(3, 32, 300), dtype=np.uint16)
    pb = make_pullback(pixels)
    assert apply_z_offset(pb, 0) is pb
    fwd = apply_z_offset(pb, 10)
    back = apply_z_offset(fwd, -10)
    assert back.calibration.z_offset_px == 0
    assert np.array_equal(back.pixels[:, :, :-10], pixels[:, :, :-10])
    assert np.all(back.pixels[:, :, -10:] == 0)


def test_apply_z_offset_moves_dp_boundary():
    from octopus import preprocess

    spec = PhantomSpec(n_frames=2, n_alines=180, n_r=700,
                       lumen=LumenSpec(radius_mm=1.0), guidewire=None, noise=0.0)
    pb, truth = phantom.generate(spec, 5)
    contours, _ = preprocess.segment_lumen_dp(pb, None)
    base = np.median(contours[0].radii)
    shifted = apply_z_offset(pb, 20)
    contours2, _ = preprocess.segment_lumen_dp(shifted, None)
    assert abs(np.median(contours2[0].radii) - (base + 20)) <= 1.0


def test_apply_z_offset_out_of_range():
    pb = make_pullback(np.zeros((2, 16, 300), dtype=np.uint16))
    with pytest.raises(OffsetOutOfRange):
        apply_z_offset(pb, 300)


def test_crop_depth_pads_and_crops():
    frame = np.arange(16 * 976, dtype=np.uint16).reshape(16, 976)
    out = crop_depth(frame, 300)
    assert out.shape == (16, 300)
    assert np.array_equal(out, frame[:, :300])
    short = np.ones((16, 120), dtype=np.uint16)
    padded = crop_depth(short, 300)
    assert padded.shape == (16, 300)
    assert np.all(padded[:, :120] == 1)
    assert np.all(padded[:, 120:] == 0)
    zero = crop_depth(np.zeros((8, 400), dtype=np.uint16))
    assert zero.shape == (8, 300) and not zero.any()


def test_calibration_validation():
    with pytest.raises(ValueError):
        Calibration(r_pixel_um=0)
    with pytest.raises(ValueError):
        Calibration(frame_spacing_mm=-1)


def test_pullback_accessors(small_phantom):
    spec, (pullback, _) = small_phantom
    assert pullback.n_frames == spec.n_frames
    assert pullback.frame(3).index == 3
    assert pullback.frame(3).n_alines == spec.n_alines
    assert len(pullback.frames) == spec.n_frames
