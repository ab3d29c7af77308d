/**
 * Longitudinal cut view and the three en face maps, with synced z-cursors.
 */

import { ApiClient, PullbackMeta } from "./api.js";

export class LongitudinalPanel {
  canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D;
  private img = new Image();
  angleDeg = 0;
  cursorFrame = 0;
  onSeek: (frame: number) => void = () => undefined;

  constructor(private api: ApiClient, public meta: PullbackMeta,
              width = 760, height = 180) {
    this.canvas = document.createElement("canvas");
    this.canvas.width = width;
    this.canvas.height = height;
    this.canvas.className = "longitudinal";
    this.ctx = this.canvas.getContext("2d")!;
    this.canvas.addEventListener("click", (ev) => {
      const rect = this.canvas.getBoundingClientRect();
      const frac = (ev.clientY - rect.top) / rect.height;
      this.onSeek(Math.round(frac * (this.meta.n_frames - 1)));
    });
  }

  async setAngle(angleDeg: number): Promise<void> {
    this.angleDeg = angleDeg;
    this.img = new Image();
    this.img.src = this.api.longitudinalUrl(this.meta.id, angleDeg);
    await this.img.decode().catch(() => undefined);
    this.draw();
  }

  setCursor(frame: number): void {
    this.cursorFrame = frame;
    this.draw();
  }

  draw(): void {
    const { width, height } = this.canvas;
    this.ctx.fillStyle = "#000";
    this.ctx.fillRect(0, 0, width, height);
    if (this.img.complete && this.img.naturalWidth) {
      // pullback axis runs down the image rows; rotate to draw horizontally
      this.ctx.save();
      this.ctx.translate(0, height);
      this.ctx.rotate(-Math.PI / 2);
      this.ctx.drawImage(this.img, 0, 0, height, width);
      this.ctx.restore();
    }
    const x = (this.cursorFrame / Math.max(this.meta.n_frames - 1, 1)) * width;
    this.ctx.strokeStyle = "#ffeb3b";
    this.ctx.beginPath();
    this.ctx.moveTo(x, 0);
    this.ctx.lineTo(x, height);
    this.ctx.stroke();
    this.ctx.fillStyle = "#eee";
    this.ctx.font = "11px sans-serif";
    this.ctx.fillText(`longitudinal @ ${this.angleDeg.toFixed(0)}°`, 6, 12);
  }
}

export class EnFacePanel {
  root: HTMLDivElement;
  private canvases: Record<string, HTMLCanvasElement> = {};
  cursorFrame = 0;
  onSeek: (frame: number) => void = () => undefined;

  constructor(private api: ApiClient, public meta: PullbackMeta,
              width = 360, rowHeight = 80) {
    this.root = document.createElement("div");
    this.root.className = "enface";
    for (const name of ["angle", "thickness", "depth"] as const) {
      const label = document.createElement("div");
      label.className = "enface-label";
      label.textContent = `en face ${name}`;
      const canvas = document.createElement("canvas");
      canvas.width = width;
      canvas.height = rowHeight;
      canvas.addEventListener("click", (ev) => {
        const rect = canvas.getBoundingClientRect();
        const frac = (ev.clientX - rect.left) / rect.width;
        this.onSeek(Math.round(frac * (this.meta.n_frames - 1)));
      });
      this.canvases[name] = canvas;
      this.root.append(label, canvas);
    }
  }

  async refresh(): Promise<void> {
    for (const name of ["angle", "thickness", "depth"] as const) {
      const img = new Image();
      img.src = this.api.enfaceUrl(this.meta.id, name);
      await img.decode().catch(() => undefined);
      const canvas = this.canvases[name];
      const ctx = canvas.getContext("2d")!;
      ctx.fillStyle = "#000";
      ctx.fillRect(0, 0, canvas.width, canvas.height);
      if (img.naturalWidth) {
        // image rows are frames; transpose so the pullback runs left-to-right
        ctx.save();
        ctx.translate(0, canvas.height);
        ctx.rotate(-Math.PI / 2);
        ctx.drawImage(img, 0, 0, canvas.height, canvas.width);
        ctx.restore();
      }
      this.drawCursor(canvas);
    }
  }

  setCursor(frame: number): void {
    this.cursorFrame = frame;
    for (const canvas of Object.values(this.canvases)) this.drawCursor(canvas);
  }

  private drawCursor(canvas: HTMLCanvasElement): void {
    const ctx = canvas.getContext("2d")!;
    const x = (this.cursorFrame / Math.max(this.meta.n_frames - 1, 1)) * canvas.width;
    ctx.strokeStyle = "#ffeb3b";
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, canvas.height);
    ctx.stroke();
  }
}
