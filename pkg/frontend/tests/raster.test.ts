import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { Stroke, applyStroke } from "../src/raster.js";

interface RasterCase {
  name: string;
  shape: [number, number];
  stroke?: Stroke;
  script?: Stroke[];
  before_b64?: string;
  after_b64: string;
}

const fixtures = JSON.parse(
  readFileSync(new URL("./fixtures/raster.json", import.meta.url), "utf-8"),
) as { cases: RasterCase[] };

function b64ToBytes(b64: string): Uint8Array {
  return Uint8Array.from(Buffer.from(b64, "base64"));
}

describe("shared stroke rasterization", () => {
  for (const c of fixtures.cases) {
    it(`matches the service byte-for-byte: ${c.name}`, () => {
      const [rows, cols] = c.shape;
      let labels = c.before_b64 ? b64ToBytes(c.before_b64)
        : new Uint8Array(rows * cols);
      const strokes = c.script ?? [c.stroke!];
      for (const stroke of strokes) {
        labels = applyStroke(labels, rows, cols, stroke);
      }
      const expected = b64ToBytes(c.after_b64);
      expect(Buffer.from(labels).equals(Buffer.from(expected))).toBe(true);
    });
  }

  it("rejects unknown tools", () => {
    expect(() => applyStroke(new Uint8Array(4), 2, 2,
      { tool: "sparkle" as never, cls: 1, points: [[0, 0]] })).toThrow();
  });
});
