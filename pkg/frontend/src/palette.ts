/** Label palette, matching the service overlay colors. */

export const LABEL_COLORS: Record<number, [number, number, number]> = {
  1: [255, 255, 0],   // lumen
  2: [255, 0, 0],     // calcium
  3: [0, 200, 0],     // lipid
  4: [0, 128, 255],   // other
  5: [128, 128, 128], // guidewire
};

export const EDIT_CLASSES: Array<{ code: number; name: string }> = [
  { code: 1, name: "lumen" },
  { code: 3, name: "lipid" },
  { code: 2, name: "calcium" },
  { code: 4, name: "other" },
];

export const OVERLAY_ALPHA = 0.45;

export const STRUT_COVERED = "#00c853";
export const STRUT_UNCOVERED = "#ff1744";
export const STENT_CONTOUR = "#2979ff";

/** Composite a label mask over grayscale RGBA pixels in place. */
export function compositeOverlay(rgba: Uint8ClampedArray, labels: Uint8Array): void {
  const n = labels.length;
  for (let i = 0; i < n; i++) {
    const color = LABEL_COLORS[labels[i]];
    if (!color) continue;
    const o = i * 4;
    rgba[o] = (1 - OVERLAY_ALPHA) * rgba[o] + OVERLAY_ALPHA * color[0];
    rgba[o + 1] = (1 - OVERLAY_ALPHA) * rgba[o + 1] + OVERLAY_ALPHA * color[1];
    rgba[o + 2] = (1 - OVERLAY_ALPHA) * rgba[o + 2] + OVERLAY_ALPHA * color[2];
  }
}
