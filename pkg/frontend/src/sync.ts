/**
 * Co-registered multi-viewer frame synchronization.
 *
 * Convention (same as the service): frame_float = frame_ref + offset.
 * Viewer 1 is always the reference; every other viewer carries its own
 * registration offset to viewer 1.
 */

export interface ViewerBinding {
  pullbackId: string;
  nFrames: number;
  /** registration offset to viewer 1; 0 for the reference itself */
  offsetFrames: number;
}

export interface SyncedPosition {
  frame: number;
  valid: boolean;
}

export function mapRefToViewer(refFrame: number, binding: ViewerBinding): SyncedPosition {
  const f = refFrame + binding.offsetFrames;
  if (f < 0 || f >= binding.nFrames) {
    return { frame: Math.min(Math.max(f, 0), binding.nFrames - 1), valid: false };
  }
  return { frame: f, valid: true };
}

export function mapViewerToRef(viewerFrame: number, binding: ViewerBinding): number {
  return viewerFrame - binding.offsetFrames;
}

export class SyncController {
  private bindings: ViewerBinding[] = [];
  private listeners: Array<(positions: SyncedPosition[]) => void> = [];
  refFrame = 0;
  enabled = true;

  setBindings(bindings: ViewerBinding[]): void {
    this.bindings = bindings;
  }

  setOffset(viewerIndex: number, offsetFrames: number): void {
    if (viewerIndex === 0) return; // viewer 1 is the reference
    this.bindings[viewerIndex].offsetFrames = offsetFrames;
    this.scrub(this.refFrame);
  }

  /** Scrub from any viewer; all registered viewers move coherently. */
  scrubFrom(viewerIndex: number, frame: number): SyncedPosition[] {
    const ref = this.enabled && viewerIndex > 0
      ? mapViewerToRef(frame, this.bindings[viewerIndex])
      : frame;
    return this.scrub(ref);
  }

  scrub(refFrame: number): SyncedPosition[] {
    const nRef = this.bindings.length ? this.bindings[0].nFrames : 1;
    this.refFrame = Math.min(Math.max(refFrame, 0), nRef - 1);
    const positions = this.bindings.map((b, i) =>
      i === 0 || !this.enabled
        ? { frame: i === 0 ? this.refFrame : Math.min(this.refFrame, b.nFrames - 1), valid: true }
        : mapRefToViewer(this.refFrame, b));
    for (const fn of this.listeners) fn(positions);
    return positions;
  }

  onChange(fn: (positions: SyncedPosition[]) => void): void {
    this.listeners.push(fn);
  }
}
