/**
 * Label editing session with optimistic concurrency.
 *
 * Strokes apply locally at once (shared rasterizer) and submit to the
 * service with the current revision; a 409 means someone else (or an
 * analysis run) advanced the labels, so the session refetches, replays its
 * unacknowledged strokes on the fresh base, and resubmits. Undo restores the
 * previous revision's pixels exactly.
 */

import { Stroke, applyStroke } from "./raster.js";

export interface EditTransport {
  fetchLabels(frame: number): Promise<{ data: Uint8Array; revision: number }>;
  submitStroke(frame: number, stroke: Stroke, revision: number):
    Promise<{ ok: true; revision: number } | { ok: false; status: 409; revision: number }>;
}

interface PendingStroke {
  frame: number;
  stroke: Stroke;
}

export class EditorSession {
  private labels = new Map<number, Uint8Array>();
  private undoStack: Array<{ frame: number; before: Uint8Array }> = [];
  private redoStack: Array<{ frame: number; before: Uint8Array; stroke: Stroke }> = [];
  private pending: PendingStroke[] = [];
  revision = 0;

  constructor(
    private transport: EditTransport,
    private rows: number,
    private cols: number,
    private maxUndo = 32,
  ) {}

  async load(frame: number): Promise<Uint8Array> {
    const { data, revision } = await this.transport.fetchLabels(frame);
    this.labels.set(frame, data);
    this.revision = revision;
    return data;
  }

  frameLabels(frame: number): Uint8Array | undefined {
    return this.labels.get(frame);
  }

  /** Apply a stroke locally and queue it for submission. */
  stroke(frame: number, stroke: Stroke): Uint8Array {
    const base = this.labels.get(frame);
    if (!base) throw new Error(`frame ${frame} not loaded`);
    this.undoStack.push({ frame, before: base.slice() });
    if (this.undoStack.length > this.maxUndo) this.undoStack.shift();
    this.redoStack = [];
    const next = applyStroke(base, this.rows, this.cols, stroke);
    this.labels.set(frame, next);
    this.pending.push({ frame, stroke });
    return next;
  }

  undo(): number | null {
    const entry = this.undoStack.pop();
    if (!entry) return null;
    const current = this.labels.get(entry.frame)!;
    const pendingIdx = this.pending.length - 1;
    const popped = pendingIdx >= 0 ? this.pending[pendingIdx] : null;
    if (popped && popped.frame === entry.frame) {
      this.redoStack.push({ frame: entry.frame, before: current.slice(),
                            stroke: popped.stroke });
      this.pending.pop();
    }
    this.labels.set(entry.frame, entry.before);
    return entry.frame;
  }

  redo(): number | null {
    const entry = this.redoStack.pop();
    if (!entry) return null;
    this.stroke(entry.frame, entry.stroke);
    return entry.frame;
  }

  /**
   * Push every pending stroke to the service; on 409 refetch and replay.
   * Returns the number of conflict rounds survived. Committed strokes leave
   * the undo horizon: undo only reaches back to the last flush.
   */
  async flush(): Promise<number> {
    let conflicts = 0;
    while (this.pending.length) {
      const { frame, stroke } = this.pending[0];
      const res = await this.transport.submitStroke(frame, stroke, this.revision);
      if (res.ok) {
        this.revision = res.revision;
        this.pending.shift();
        continue;
      }
      conflicts += 1;
      // stale: rebase every pending stroke onto the fresh server state
      const frames = [...new Set(this.pending.map((p) => p.frame))];
      for (const f of frames) {
        const { data, revision } = await this.transport.fetchLabels(f);
        this.revision = revision;
        let rebased = data;
        for (const p of this.pending) {
          if (p.frame === f) rebased = applyStroke(rebased, this.rows, this.cols, p.stroke);
        }
        this.labels.set(f, rebased);
      }
      this.undoStack = [];
      this.redoStack = [];
    }
    this.undoStack = [];
    this.redoStack = [];
    return conflicts;
  }
}
