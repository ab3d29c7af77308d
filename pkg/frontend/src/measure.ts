/**
 * Measurement formulas shared with the analysis service.
 *
 * Every number the UI displays is either fetched from the service or
 * computed here with the exact server formulas (fixture-tested).
 */

export type Point = [number, number];

/** Angle swept counterclockwise from ray vertex->p1 to ray vertex->p2, degrees. */
export function angleDeg(p1: Point, p2: Point, vertex: Point): number {
  const a1 = Math.atan2(p1[1] - vertex[1], p1[0] - vertex[0]);
  const a2 = Math.atan2(p2[1] - vertex[1], p2[0] - vertex[0]);
  const twoPi = 2.0 * Math.PI;
  return (((a2 - a1) % twoPi + twoPi) % twoPi) * (180.0 / Math.PI);
}

/** Euclidean cross-sectional distance in millimeters. */
export function lengthMm(p1: Point, p2: Point, rPixelUm: number): number {
  const dPx = Math.hypot(p2[0] - p1[0], p2[1] - p1[1]);
  return (dPx * rPixelUm) / 1000.0;
}

/** Longitudinal distance between two frames in millimeters. */
export function spanMm(frameA: number, frameB: number, frameSpacingMm: number): number {
  return Math.abs(frameB - frameA) * frameSpacingMm;
}
