/**
 * Label stroke rasterization, byte-identical to the server.
 *
 * Rules (shared contract, do not change independently):
 * - brush: disk (dr*dr + dc*dc <= r*r) stamped on every Bresenham line point
 *   between consecutive stroke points;
 * - freehand: even-odd scanline fill over pixel-center rows with half-open
 *   right span edges;
 * - fill: 4-connected flood fill of the seed pixel's class region.
 *
 * Strokes live on the polar grid: row = A-line, col = radius.
 */

export interface Stroke {
  tool: "brush" | "freehand" | "fill";
  cls: number;
  points: number[][];
  radius?: number;
}

export function bresenham(r0: number, c0: number, r1: number, c1: number): Array<[number, number]> {
  const points: Array<[number, number]> = [];
  const dr = Math.abs(r1 - r0);
  const dc = Math.abs(c1 - c0);
  const sr = r0 < r1 ? 1 : -1;
  const sc = c0 < c1 ? 1 : -1;
  let err = dr - dc;
  let r = r0;
  let c = c0;
  for (;;) {
    points.push([r, c]);
    if (r === r1 && c === c1) return points;
    const e2 = 2 * err;
    if (e2 > -dc) {
      err -= dc;
      r += sr;
    }
    if (e2 < dr) {
      err += dr;
      c += sc;
    }
  }
}

function diskOffsets(radius: number): Array<[number, number]> {
  const offs: Array<[number, number]> = [];
  for (let dr = -radius; dr <= radius; dr++) {
    for (let dc = -radius; dc <= radius; dc++) {
      if (dr * dr + dc * dc <= radius * radius) offs.push([dr, dc]);
    }
  }
  return offs;
}

export function applyBrush(
  labels: Uint8Array, rows: number, cols: number,
  cls: number, points: number[][], radius: number,
): Uint8Array {
  const out = labels.slice();
  const offsets = diskOffsets(radius);
  const stamped = new Set<number>();
  const pts = points.length === 1 ? [points[0], points[0]] : points;
  for (let i = 0; i + 1 < pts.length; i++) {
    const [r0, c0] = pts[i];
    const [r1, c1] = pts[i + 1];
    for (const [r, c] of bresenham(Math.trunc(r0), Math.trunc(c0), Math.trunc(r1), Math.trunc(c1))) {
      stamped.add(r * 1_000_000 + c);
    }
  }
  for (const key of stamped) {
    const r = Math.floor(key / 1_000_000);
    const c = key % 1_000_000;
    for (const [dr, dc] of offsets) {
      const rr = r + dr;
      const cc = c + dc;
      if (rr >= 0 && rr < rows && cc >= 0 && cc < cols) out[rr * cols + cc] = cls;
    }
  }
  return out;
}

export function applyFreehand(
  labels: Uint8Array, rows: number, cols: number,
  cls: number, polygon: number[][],
): Uint8Array {
  const out = labels.slice();
  if (polygon.length < 3) return out;
  const ys = polygon.map((p) => p[0]);
  const xs = polygon.map((p) => p[1]);
  const n = polygon.length;
  const rMin = Math.max(0, Math.floor(Math.min(...ys)));
  const rMax = Math.min(rows - 1, Math.ceil(Math.max(...ys)));
  for (let r = rMin; r <= rMax; r++) {
    const y = r;
    const crossings: number[] = [];
    for (let i = 0; i < n; i++) {
      const y1 = ys[i];
      const x1 = xs[i];
      const y2 = ys[(i + 1) % n];
      const x2 = xs[(i + 1) % n];
      if ((y1 <= y && y < y2) || (y2 <= y && y < y1)) {
        const t = (y - y1) / (y2 - y1);
        crossings.push(x1 + t * (x2 - x1));
      }
    }
    crossings.sort((a, b) => a - b);
    for (let k = 0; k + 1 < crossings.length; k += 2) {
      let c0 = Math.ceil(crossings[k]);
      let c1 = Math.floor(crossings[k + 1]);
      if (crossings[k + 1] === c1) c1 -= 1; // half-open right edge
      c0 = Math.max(c0, 0);
      c1 = Math.min(c1, cols - 1);
      for (let c = c0; c <= c1; c++) out[r * cols + c] = cls;
    }
  }
  return out;
}

export function applyFill(
  labels: Uint8Array, rows: number, cols: number,
  cls: number, seed: [number, number],
): Uint8Array {
  const out = labels.slice();
  const [r0, c0] = [Math.trunc(seed[0]), Math.trunc(seed[1])];
  if (r0 < 0 || r0 >= rows || c0 < 0 || c0 >= cols) return out;
  const target = out[r0 * cols + c0];
  if (target === cls) return out;
  const stack: Array<[number, number]> = [[r0, c0]];
  while (stack.length) {
    const [r, c] = stack.pop()!;
    if (r < 0 || r >= rows || c < 0 || c >= cols || out[r * cols + c] !== target) continue;
    out[r * cols + c] = cls;
    stack.push([r - 1, c], [r + 1, c], [r, c - 1], [r, c + 1]);
  }
  return out;
}

export function applyStroke(
  labels: Uint8Array, rows: number, cols: number, stroke: Stroke,
): Uint8Array {
  if (stroke.tool === "brush") {
    return applyBrush(labels, rows, cols, stroke.cls, stroke.points, stroke.radius ?? 1);
  }
  if (stroke.tool === "freehand") {
    return applyFreehand(labels, rows, cols, stroke.cls, stroke.points);
  }
  if (stroke.tool === "fill") {
    return applyFill(labels, rows, cols, stroke.cls, [stroke.points[0][0], stroke.points[0][1]]);
  }
  throw new Error(`unknown tool ${(stroke as Stroke).tool}`);
}
