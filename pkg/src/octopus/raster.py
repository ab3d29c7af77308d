"""Shared label-stroke rasterization.

The browser editor reimplements these exact rules so client- and server-side
rasterization of a stroke are byte-identical:

- brush: a disk of the given radius (dx*dx + dy*dy <= r*r) stamped at every
  point of the Bresenham line between consecutive stroke points;
- freehand: closed polygon filled by the even-odd rule, evaluated on pixel
  centers with half-open scanline spans [ceil(x), ...) per crossing pair;
- fill: 4-connected flood fill of the seed pixel's current class.

Strokes are expressed in polar grid coordinates: row = A-line, col = radius.
"""

from __future__ import annotations

import math

import numpy as np


def bresenham(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Integer line points from (r0, c0) to (r1, c1), endpoints included."""
    points = []
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dr - dc
    r, c = r0, c0
    while True:
        points.append((r, c))
        if r == r1 and c == c1:
            return points
        e2 = 2 * err
        if e2 > -dc:
            err -= dc
            r += sr
        if e2 < dr:
            err += dr
            c += sc


def _disk_offsets(radius: int) -> list[tuple[int, int]]:
    offs = []
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            if dr * dr + dc * dc <= radius * radius:
                offs.append((dr, dc))
    return offs


def apply_brush(
    labels: np.ndarray, cls: int, points: list[tuple[int, int]], radius: int
) -> np.ndarray:
    """Stamp a Bresenham-disk brush along a polyline of (row, col) points."""
    out = labels.copy()
    n_rows, n_cols = out.shape
    offsets = _disk_offsets(radius)
    stamped = set()
    pts = [points[0]] if len(points) == 1 else points
    for (r0, c0), (r1, c1) in zip(pts, pts[1:] or pts):
        for r, c in bresenham(int(r0), int(c0), int(r1), int(c1)):
            stamped.add((r, c))
    for r, c in stamped:
        for dr, dc in offsets:
            rr, cc = r + dr, c + dc
            if 0 <= rr < n_rows and 0 <= cc < n_cols:
                out[rr, cc] = cls
    return out


def apply_freehand(
    labels: np.ndarray, cls: int, polygon: list[tuple[float, float]]
) -> np.ndarray:
    """Fill a closed polygon of (row, col) vertices by the even-odd rule."""
    out = labels.copy()
    n_rows, n_cols = out.shape
    if len(polygon) < 3:
        return out
    rows = [float(p[0]) for p in polygon]
    cols = [float(p[1]) for p in polygon]
    n = len(polygon)
    r_min = max(0, int(math.floor(min(rows))))
    r_max = min(n_rows - 1, int(math.ceil(max(rows))))
    for r in range(r_min, r_max + 1):
        y = r  # scanline through pixel-center rows
        xs = []
        for i in range(n):
            y1, x1 = rows[i], cols[i]
            y2, x2 = rows[(i + 1) % n], cols[(i + 1) % n]
            if (y1 <= y < y2) or (y2 <= y < y1):
                t = (y - y1) / (y2 - y1)
                xs.append(x1 + t * (x2 - x1))
        xs.sort()
        for k in range(0, len(xs) - 1, 2):
            c0 = int(math.ceil(xs[k]))
            c1 = int(math.floor(xs[k + 1]))
            if xs[k + 1] == c1:  # half-open right edge
                c1 -= 1
            c0 = max(c0, 0)
            c1 = min(c1, n_cols - 1)
            if c1 >= c0:
                out[r, c0:c1 + 1] = cls
    return out


def apply_fill(labels: np.ndarray, cls: int, seed: tuple[int, int]) -> np.ndarray:
    """4-connected flood fill of the seed pixel's class region."""
    out = labels.copy()
    n_rows, n_cols = out.shape
    r0, c0 = int(seed[0]), int(seed[1])
    if not (0 <= r0 < n_rows and 0 <= c0 < n_cols):
        return out
    target = out[r0, c0]
    if target == cls:
        return out
    stack = [(r0, c0)]
    while stack:
        r, c = stack.pop()
        if not (0 <= r < n_rows and 0 <= c < n_cols) or out[r, c] != target:
            continue
        out[r, c] = cls
        stack.extend([(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)])
    return out


def apply_stroke(labels: np.ndarray, stroke: dict) -> np.ndarray:
    """Apply one transcript stroke: {tool, cls, points, radius?}."""
    tool = stroke["tool"]
    cls = int(stroke["cls"])
    points = stroke.get("points", [])
    if tool == "brush":
        return apply_brush(labels, cls, points, int(stroke.get("radius", 1)))
    if tool == "freehand":
        return apply_freehand(labels, cls, points)
    if tool == "fill":
        return apply_fill(labels, cls, tuple(points[0]))
    raise ValueError(f"unknown tool {tool!r}")
