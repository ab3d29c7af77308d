"""Automated plaque and stent analysis for intravascular OCT pullbacks."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Calibration,
    Contour,
    PolarFrame,
    Pullback,
    apply_z_offset,
    crop_depth,
    polar_to_cartesian,
)
