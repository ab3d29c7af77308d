"""Major-calcification frame gating and calcium segmentation.

Segmentation runs behind a pluggable provider interface so externally
computed probability maps (e.g. from a trained model) drop in unchanged; the
built-in reference provider operationalizes the defining appearance rule:
a signal-poor pocket with a sharply delineated leading border.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_opening
from scipy.ndimage import label as cc_label

from .model import LABEL_BACKGROUND, LABEL_CALCIUM
from .preprocess import unshift_mask


@dataclass(frozen=True)
class FrameGate:
    """Per-frame major-calcification decision and its raw score."""

    gated: np.ndarray   # bool (n_frames,)
    scores: np.ndarray  # float (n_frames,) in [0, 1]


def _replicate_pad_morph_1d(x: np.ndarray, size: int, op) -> np.ndarray:
    pad = size // 2
    ext = np.pad(x, pad, mode="edge")
    view = np.lib.stride_tricks.sliding_window_view(ext, size)
    return op(view, axis=-1)


def opening_1d(x: np.ndarray, size: int = 3) -> np.ndarray:
    """Erosion then dilation along a boolean series (edge-replicated)."""
    eroded = _replicate_pad_morph_1d(x.astype(bool), size, np.min)
    return _replicate_pad_morph_1d(eroded, size, np.max)


def closing_1d(x: np.ndarray, size: int = 3) -> np.ndarray:
    """Dilation then erosion along a boolean series (edge-replicated)."""
    dilated = _replicate_pad_morph_1d(x.astype(bool), size, np.max)
    return _replicate_pad_morph_1d(dilated, size, np.min)


def gate_frames(scores: np.ndarray, threshold: float) -> FrameGate:
    """Threshold per-frame scores, then open and close with length-3 elements."""
    scores = np.asarray(scores, dtype=np.float64)
    raw = scores >= threshold
    if raw.size >= 2:
        cleaned = closing_1d(opening_1d(raw, 3), 3)
    else:
        cleaned = raw
    return FrameGate(gated=cleaned, scores=scores)


def disk_structure(radius: int) -> np.ndarray:
    """Discrete disk structuring element (kernel size 2*radius+1)."""
    span = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    return (yy ** 2 + xx ** 2) <= radius ** 2


class ReferenceSegmenter:
    """Rule-based calcium probability provider on shifted 300-px patches.

    Probability is the product of low-intensity evidence inside a candidate
    pocket and gradient evidence at the pocket's leading border. Pockets are
    found by thresholding against the depth-wise tissue reference profile and
    connected components; shadowed A-lines are excluded.
    """

    name = "reference"
    version = "1"

    def __init__(
        self,
        *,
        low_frac: float = 0.5,
        min_component_px: int = 30,
        shadow_floor: float = 0.08,
        border_halfwidth: int = 3,
        shallow_depth_px: int = 50,
    ):
        self.low_frac = low_frac
        self.min_component_px = min_component_px
        self.shadow_floor = shadow_floor
        self.border_halfwidth = border_halfwidth
        self.shallow_depth_px = shallow_depth_px

    def probabilities(self, patch: np.ndarray, frame_index: int) -> np.ndarray:
        return reference_segment(
            patch,
            low_frac=self.low_frac,
            min_component_px=self.min_component_px,
            shadow_floor=self.shadow_floor,
            border_halfwidth=self.border_halfwidth,
            shallow_depth_px=self.shallow_depth_px,
        )


class ExternalSegmenter:
    """Provider backed by an externally computed probability volume.

    The volume shares the pullback layout (unshifted); the per-frame shift
    record aligns it with the shifted analysis patches.
    """

    name = "external"
    version = "1"

    def __init__(self, probs: np.ndarray, shifts: np.ndarray, depth_px: int = 300):
        self._probs = probs
        self._shifts = shifts
        self._depth = depth_px

    def probabilities(self, patch: np.ndarray, frame_index: int) -> np.ndarray:
        vol = self._probs[frame_index]
        A, R = vol.shape
        out = np.zeros((A, self._depth), dtype=np.float32)
        for a in range(A):
            s = int(self._shifts[frame_index, a])
            width = min(self._depth, R - s)
            if width > 0:
                out[a, :width] = vol[a, s:s + width]
        return out[: patch.shape[0], : patch.shape[1]]


def reference_segment(
    patch: np.ndarray,
    *,
    low_frac: float = 0.5,
    min_component_px: int = 30,
    shadow_floor: float = 0.08,
    border_halfwidth: int = 3,
    shallow_depth_px: int = 50,
) -> np.ndarray:
    """Calcium probability map for one shifted, Gaussian-filtered patch."""
    patch = patch.astype(np.float32)
    A, D = patch.shape
    prob = np.zeros((A, D), dtype=np.float32)
    aline_mean = patch.mean(axis=1)
    frame_level = float(np.median(aline_mean))
    if frame_level <= 0:
        return prob
    valid = aline_mean > shadow_floor * frame_level
    if valid.sum() < 4:
        return prob

    # depth-wise tissue reference from non-shadowed A-lines; a high
    # percentile keeps the reference on tissue even when calcium spans most
    # of the circumference
    ref = np.percentile(patch[valid], 75, axis=0)
    ref = np.maximum(ref, 1e-6)
    low = (patch < low_frac * ref[None, :]) & valid[:, None]
    low[:, :2] = False  # boundary column is the lumen edge itself

    comps, n_comps = cc_label(low, structure=np.ones((3, 3), dtype=bool))
    if n_comps == 0:
        return prob
    for c in range(1, n_comps + 1):
        region = comps == c
        if region.sum() < min_component_px:
            continue
        region_alines = np.flatnonzero(region.any(axis=1))
        inner = np.argmax(region, axis=1)  # first region column per A-line
        # darkness evidence: how far below the reference the pocket interior sits
        interior_ratio = float(np.mean(patch[region] / ref[np.nonzero(region)[1]]))
        darkness = np.clip((low_frac - interior_ratio) / low_frac, 0.0, 1.0)
        # border evidence: drop across the leading edge relative to the reference
        drops = []
        for a in region_alines:
            j = inner[a]
            j0 = max(j - border_halfwidth, 0)
            j1 = min(j + border_halfwidth, D - 1)
            drops.append((patch[a, j0] - patch[a, j1]) / ref[j])
        border = np.clip(np.mean(drops) / (1.0 - low_frac), 0.0, 1.0)
        prob[region] = darkness * border
    return prob


def gate_score_from_probs(prob: np.ndarray, aline_prob: float = 0.5) -> float:
    """Fraction of A-lines carrying any probability above `aline_prob`."""
    return float((prob >= aline_prob).any(axis=1).mean())


def postprocess_labels(
    probs: list[np.ndarray],
    gate: FrameGate,
    threshold: float,
    shifts: np.ndarray,
    labels: np.ndarray,
    *,
    island_radius: int = 2,
) -> np.ndarray:
    """Write the calcium layer into a label volume.

    Probability maps are thresholded on gated frames only, opened with a
    disk structuring element (kernel size 5 by default) to drop small
    islands, and mapped back to unshifted coordinates. Existing lumen and
    guidewire labels are never overwritten.
    """
    out = labels.copy()
    structure = disk_structure(island_radius)
    min_component = int(structure.sum())
    n_r = labels.shape[2]
    for f in range(labels.shape[0]):
        # clear previous calcium (e.g. from a re-run)
        frame = out[f]
        frame[frame == LABEL_CALCIUM] = LABEL_BACKGROUND
        if not gate.gated[f]:
            continue
        mask = probs[f] >= threshold
        mask = binary_opening(mask, structure=structure)
        full = unshift_mask(mask.astype(np.uint8), shifts[f], n_r).astype(bool)
        # unshifting shears across A-lines and can split off slivers smaller
        # than the opening element; drop them
        comps, n_comps = cc_label(full, structure=np.ones((3, 3), dtype=bool))
        if n_comps:
            sizes = np.bincount(comps.ravel())
            full &= sizes[comps] >= min_component
        writable = frame == LABEL_BACKGROUND
        frame[full & writable] = LABEL_CALCIUM
    return out


def run_segmenter(
    patches: np.ndarray,
    segmenter,
    *,
    gate_aline_prob: float = 0.5,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Score every frame with a provider; returns (prob maps, gate scores)."""
    probs: list[np.ndarray] = []
    scores = np.zeros(patches.shape[0])
    for f in range(patches.shape[0]):
        p = segmenter.probabilities(patches[f], f)
        probs.append(p)
        scores[f] = gate_score_from_probs(p, gate_aline_prob)
    return probs, scores
