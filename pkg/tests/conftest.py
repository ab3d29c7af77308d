import numpy as np
import pytest

from octopus import modelbank, phantom, preprocess
from octopus.phantom import (
    CalciumLesionSpec,
    GuidewireSpec,
    LumenSpec,
    PhantomSpec,
    StrutSpec,
)


@pytest.fixture(scope="session")
def default_models():
    """Builtin strut models; trained once per test session."""
    return modelbank.build_default_models(902)


@pytest.fixture(scope="session")
def small_phantom():
    """Noiseless phantom with a guidewire, one lesion, and two struts."""
    spec = PhantomSpec(
        n_frames=16, n_alines=360, n_r=700,
        lumen=LumenSpec(radius_mm=1.5),
        guidewire=GuidewireSpec(angle_deg=180, width_deg=20),
        lesions=(CalciumLesionSpec(4, 11, angle_deg=90, arc_deg=90,
                                   depth_mm=0.1, thickness_mm=0.5),),
        struts=(StrutSpec(frame=2, angle_deg=45, coverage_mm=0.08),
                StrutSpec(frame=2, angle_deg=300, offset_mm=0.3)),
        noise=0.0,
    )
    return spec, phantom.generate(spec, 42)


@pytest.fixture(scope="session")
def noisy_phantom():
    """Speckled phantom with calcium, used by plaque and registration tests."""
    spec = PhantomSpec(
        n_frames=40, n_alines=360, n_r=640,
        lumen=LumenSpec(radius_mm=1.2, ellipticity=1.15),
        guidewire=GuidewireSpec(angle_deg=200, width_deg=18),
        lesions=(CalciumLesionSpec(6, 30, angle_deg=80, arc_deg=100,
                                   depth_mm=0.08, thickness_mm=0.6),
                 CalciumLesionSpec(18, 36, angle_deg=310, arc_deg=60,
                                   depth_mm=0.15, thickness_mm=0.4)),
        noise=1.0,
    )
    return spec, phantom.generate(spec, 21)


@pytest.fixture(scope="session")
def segmented_noisy(noisy_phantom):
    """Guidewire band + lumen contours of the noisy phantom (production path)."""
    spec, (pullback, truth) = noisy_phantom
    band = preprocess.detect_guidewire(preprocess.accumulate_intensity(pullback))
    contours, failed = preprocess.segment_lumen_dp(pullback, band)
    assert not failed
    return band, contours


def random_phantom_spec(rng: np.random.Generator, *, struts: bool = False,
                        n_frames: int = 8, n_alines: int = 120,
                        n_r: int = 560) -> PhantomSpec:
    """Small randomized phantom spec for property-style sweeps."""
    radius = float(rng.uniform(0.65, 0.95))
    lesions = []
    n_lesions = int(rng.integers(1, 3))
    for _ in range(n_lesions):
        f0 = int(rng.integers(0, n_frames - 2))
        f1 = int(rng.integers(f0, n_frames - 1))
        lesions.append(CalciumLesionSpec(
            frame_start=f0, frame_end=f1,
            angle_deg=float(rng.uniform(0, 360)),
            arc_deg=float(rng.uniform(30, 170)),
            depth_mm=float(rng.uniform(0.0, 0.25)),
            thickness_mm=float(rng.uniform(0.2, 0.7)),
        ))
    strut_list = []
    if struts:
        for f in range(2, n_frames, 3):
            for angle in rng.uniform(0, 360, size=3):
                strut_list.append(StrutSpec(frame=f, angle_deg=float(angle),
                                            coverage_mm=float(rng.uniform(0.04, 0.2))))
    return PhantomSpec(
        n_frames=n_frames, n_alines=n_alines, n_r=n_r,
        lumen=LumenSpec(radius_mm=radius,
                        ellipticity=float(rng.uniform(1.0, 1.3)),
                        rotation_deg=float(rng.uniform(0, 180))),
        guidewire=GuidewireSpec(angle_deg=float(rng.uniform(0, 360)), width_deg=20.0)
        if rng.uniform() < 0.7 else None,
        lesions=tuple(lesions),
        struts=tuple(strut_list),
        noise=float(rng.uniform(0, 1.0)),
    )
