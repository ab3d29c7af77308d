/**
 * Cross-sectional viewer: base frame PNG with client-side label overlay
 * compositing, zoom, frame scrubbing, measurement picks, and the projection
 * angle handle that drives the longitudinal view.
 *
 * Editing happens on the unrolled (r, theta) canvas so strokes live on the
 * label grid itself and rasterize byte-identically on the server.
 */

import { ApiClient, PullbackMeta } from "./api.js";
import { EditorSession } from "./editor.js";
import { Stroke } from "./raster.js";
import { compositeOverlay, STRUT_COVERED, STRUT_UNCOVERED } from "./palette.js";
import { angleDeg, lengthMm, Point } from "./measure.js";

export type ViewKind = "xy" | "rtheta";

export interface StrutMarker {
  frame: number;
  aline: number;
  radiusPx: number;
  covered: boolean;
}

export type StentContours = Record<string, number[]>;

export class CrossSectionViewer {
  canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D;
  frame = 0;
  view: ViewKind = "xy";
  overlay = true;
  zoom = 1.0;
  projectionAngleDeg = 0;
  struts: StrutMarker[] = [];
  stentContours: StentContours = {};
  onFrameChange: (frame: number) => void = () => undefined;
  onAngleChange: (angleDeg: number) => void = () => undefined;
  onMeasure: (text: string) => void = () => undefined;
  measureMode: "off" | "angle" | "length" = "off";
  private measurePicks: Point[] = [];
  private baseImage: HTMLImageElement | null = null;
  private labelBytes: Uint8Array | null = null;
  private draggingAngle = false;

  constructor(
    private api: ApiClient,
    public meta: PullbackMeta,
    private size = 560,
  ) {
    this.canvas = document.createElement("canvas");
    this.canvas.width = this.size;
    this.canvas.height = this.size;
    this.canvas.className = "xsec";
    this.ctx = this.canvas.getContext("2d")!;
    this.bindEvents();
  }

  private bindEvents(): void {
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      if (ev.ctrlKey) {
        this.zoom = Math.min(6, Math.max(1, this.zoom * (ev.deltaY < 0 ? 1.15 : 0.87)));
        this.draw();
      } else {
        this.setFrame(this.frame + (ev.deltaY > 0 ? 1 : -1));
      }
    }, { passive: false });
    this.canvas.addEventListener("mousedown", (ev) => {
      const p = this.canvasPoint(ev);
      if (this.measureMode !== "off") {
        this.pickMeasure(p);
        return;
      }
      if (this.nearAngleHandle(p)) this.draggingAngle = true;
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      if (!this.draggingAngle) return;
      const p = this.canvasPoint(ev);
      const c = (this.size - 1) / 2;
      const deg = (Math.atan2(p[1] - c, p[0] - c) * 180) / Math.PI;
      this.projectionAngleDeg = (deg + 360) % 360;
      this.draw();
      this.onAngleChange(this.projectionAngleDeg);
    });
    window.addEventListener("mouseup", () => (this.draggingAngle = false));
  }

  private canvasPoint(ev: MouseEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return [
      ((ev.clientX - rect.left) / rect.width) * this.canvas.width,
      ((ev.clientY - rect.top) / rect.height) * this.canvas.height,
    ];
  }

  private nearAngleHandle(p: Point): boolean {
    const c = (this.size - 1) / 2;
    const ang = (this.projectionAngleDeg * Math.PI) / 180;
    const hx = c + Math.cos(ang) * c * 0.9;
    const hy = c + Math.sin(ang) * c * 0.9;
    return Math.hypot(p[0] - hx, p[1] - hy) < 18;
  }

  private pickMeasure(p: Point): void {
    this.measurePicks.push(p);
    const c: Point = [(this.size - 1) / 2, (this.size - 1) / 2];
    if (this.measureMode === "angle" && this.measurePicks.length === 2) {
      const deg = angleDeg(this.measurePicks[0], this.measurePicks[1], c);
      this.onMeasure(`${deg.toFixed(1)}°`);
      this.measurePicks = [];
    } else if (this.measureMode === "length" && this.measurePicks.length === 2) {
      const mm = lengthMm(this.measurePicks[0], this.measurePicks[1],
                          this.meta.r_pixel_um);
      this.onMeasure(`${mm.toFixed(3)} mm`);
      this.measurePicks = [];
    }
    this.draw();
  }

  setFrame(frame: number): void {
    const f = Math.min(Math.max(frame, 0), this.meta.n_frames - 1);
    if (f === this.frame) return;
    this.frame = f;
    this.refresh();
    this.onFrameChange(f);
  }

  /** Move without re-emitting (sync-driven updates). */
  showFrame(frame: number): void {
    this.frame = Math.min(Math.max(frame, 0), this.meta.n_frames - 1);
    this.refresh();
  }

  async refresh(): Promise<void> {
    const img = new Image();
    img.src = this.api.frameUrl(this.meta.id, this.frame, this.view, false, this.size);
    await img.decode().catch(() => undefined);
    this.baseImage = img;
    if (this.overlay && this.view === "rtheta") {
      const { data } = await this.api.fetchLabels(this.meta.id, this.frame);
      this.labelBytes = data;
    } else {
      this.labelBytes = null;
    }
    this.draw();
  }

  draw(): void {
    const ctx = this.ctx;
    ctx.save();
    ctx.fillStyle = "#000";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.baseImage) {
      const c = this.size / 2;
      ctx.translate(c, c);
      ctx.scale(this.zoom, this.zoom);
      ctx.translate(-c, -c);
      if (this.overlay && this.view === "xy") {
        // server-side overlay for the xy view (exact polar->cartesian match)
        const img = new Image();
        img.src = this.api.frameUrl(this.meta.id, this.frame, "xy", true, this.size);
        img.decode().then(() => {
          ctx.drawImage(img, 0, 0, this.size, this.size);
          this.drawAnnotations();
        }).catch(() => undefined);
      } else {
        ctx.drawImage(this.baseImage, 0, 0, this.size, this.size);
        if (this.labelBytes && this.view === "rtheta") {
          this.drawRthetaOverlay();
        }
      }
    }
    ctx.restore();
    this.drawAnnotations();
  }

  private drawRthetaOverlay(): void {
    const { n_alines, n_r } = this.meta;
    const off = new OffscreenCanvas(n_r, n_alines);
    const octx = off.getContext("2d")!;
    const image = octx.createImageData(n_r, n_alines);
    image.data.fill(0);
    compositeOverlay(image.data, this.labelBytes!);
    // alpha only where labeled
    for (let i = 0; i < this.labelBytes!.length; i++) {
      image.data[i * 4 + 3] = this.labelBytes![i] ? 140 : 0;
    }
    octx.putImageData(image, 0, 0);
    this.ctx.drawImage(off, 0, 0, this.size, this.size);
  }

  private drawAnnotations(): void {
    const ctx = this.ctx;
    const c = (this.size - 1) / 2;
    if (this.view === "xy") {
      // projection angle handle: red toward angle, green opposite
      const ang = (this.projectionAngleDeg * Math.PI) / 180;
      ctx.lineWidth = 2;
      ctx.strokeStyle = "#e53935";
      ctx.beginPath();
      ctx.moveTo(c, c);
      ctx.lineTo(c + Math.cos(ang) * c * 0.95, c + Math.sin(ang) * c * 0.95);
      ctx.stroke();
      ctx.strokeStyle = "#43a047";
      ctx.beginPath();
      ctx.moveTo(c, c);
      ctx.lineTo(c - Math.cos(ang) * c * 0.95, c - Math.sin(ang) * c * 0.95);
      ctx.stroke();
      this.drawStruts();
    }
    ctx.fillStyle = "#eee";
    ctx.font = "12px sans-serif";
    ctx.fillText(`frame ${this.frame + 1}/${this.meta.n_frames}`, 8, 16);
    for (const p of this.measurePicks) {
      ctx.fillStyle = "#ffeb3b";
      ctx.fillRect(p[0] - 2, p[1] - 2, 4, 4);
    }
  }

  private drawStruts(): void {
    const ctx = this.ctx;
    const c = (this.size - 1) / 2;
    const radii = this.stentContours[String(this.frame)];
    if (radii) {
      // interpolated stent contour in blue
      const scale = this.size / (2 * this.meta.n_r) * 2;
      ctx.beginPath();
      radii.forEach((r, i) => {
        const theta = (i * 2 * Math.PI) / radii.length;
        const x = c + Math.cos(theta) * r * scale;
        const y = c + Math.sin(theta) * r * scale;
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.closePath();
      ctx.strokeStyle = "#2979ff";
      ctx.lineWidth = 1.5;
      ctx.stroke();
    }
    for (const s of this.struts) {
      if (s.frame !== this.frame) continue;
      const theta = (s.aline * 2 * Math.PI) / this.meta.n_alines;
      const x = c + Math.cos(theta) * s.radiusPx * (this.size / (2 * this.meta.n_r)) * 2;
      const y = c + Math.sin(theta) * s.radiusPx * (this.size / (2 * this.meta.n_r)) * 2;
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.strokeStyle = s.covered ? STRUT_COVERED : STRUT_UNCOVERED;
      ctx.lineWidth = 2;
      ctx.stroke();
    }
  }
}

/** Editing layer bound to the rtheta view of one viewer. */
export class EditController {
  tool: Stroke["tool"] = "brush";
  cls = 2;
  radius = 2;
  private strokePoints: number[][] = [];
  private drawing = false;

  constructor(
    private viewer: CrossSectionViewer,
    public session: EditorSession,
  ) {
    const canvas = viewer.canvas;
    canvas.addEventListener("mousedown", (ev) => {
      if (viewer.view !== "rtheta" || viewer.measureMode !== "off") return;
      if (!ev.shiftKey) return; // edit strokes are shift-drags
      this.drawing = true;
      this.strokePoints = [this.gridPoint(ev)];
    });
    canvas.addEventListener("mousemove", (ev) => {
      if (!this.drawing) return;
      this.strokePoints.push(this.gridPoint(ev));
    });
    window.addEventListener("mouseup", async () => {
      if (!this.drawing) return;
      this.drawing = false;
      await this.commitStroke();
    });
  }

  private gridPoint(ev: MouseEvent): number[] {
    const rect = this.viewer.canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * this.viewer.meta.n_r;
    const y = ((ev.clientY - rect.top) / rect.height) * this.viewer.meta.n_alines;
    return [Math.trunc(y), Math.trunc(x)]; // (aline row, radius col)
  }

  private async commitStroke(): Promise<void> {
    if (!this.strokePoints.length) return;
    const frame = this.viewer.frame;
    if (!this.session.frameLabels(frame)) await this.session.load(frame);
    const stroke: Stroke = this.tool === "fill"
      ? { tool: "fill", cls: this.cls, points: [this.strokePoints[0]] }
      : { tool: this.tool, cls: this.cls, points: this.strokePoints,
          radius: this.radius };
    this.session.stroke(frame, stroke);
    this.viewer.draw();
  }

  /** Commit pending strokes to the service (Save). */
  async save(): Promise<void> {
    await this.session.flush();
    await this.viewer.refresh();
  }

  async undo(): Promise<void> {
    if (this.session.undo() !== null) await this.viewer.refresh();
  }

  async redo(): Promise<void> {
    if (this.session.redo() !== null) await this.viewer.refresh();
  }
}
