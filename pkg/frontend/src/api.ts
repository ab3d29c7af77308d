/** Typed client for the analysis service. */

import { Stroke } from "./raster.js";

export interface PullbackMeta {
  id: string;
  n_frames: number;
  n_alines: number;
  n_r: number;
  r_pixel_um: number;
  frame_spacing_mm: number;
  z_offset_px: number;
  revision: number;
}

export interface JobStatus {
  job_id: string;
  status: "queued" | "running" | "done" | "failed";
  stage: string;
  progress: number;
  error: string | null;
}

export interface StrutRow {
  frame: string;
  aline: string;
  radius_px: string;
  covered: string;
  coverage_um: string;
  malapposition_um: string;
  malapposed: string;
}

export interface RegistrationOutcome {
  offset_frames: number;
  peak_correlation: number;
  mode: string;
  warning: string | null;
}

export class ApiClient {
  constructor(private base = "") {}

  async listPullbacks(): Promise<PullbackMeta[]> {
    return this.json(await fetch(`${this.base}/pullbacks`));
  }

  frameUrl(id: string, frame: number, view: "xy" | "rtheta", overlay: boolean,
           size = 600): string {
    return `${this.base}/pullbacks/${id}/frames/${frame}` +
      `?view=${view}&overlay=${overlay ? 1 : 0}&size=${size}`;
  }

  longitudinalUrl(id: string, angleDeg: number): string {
    return `${this.base}/pullbacks/${id}/longitudinal?angle=${angleDeg.toFixed(1)}`;
  }

  enfaceUrl(id: string, map: "angle" | "thickness" | "depth"): string {
    return `${this.base}/pullbacks/${id}/enface?map=${map}`;
  }

  async fetchLabels(id: string, frame: number):
      Promise<{ data: Uint8Array; revision: number }> {
    const res = await fetch(`${this.base}/pullbacks/${id}/labels/${frame}`);
    if (!res.ok) throw new Error(`labels fetch failed: ${res.status}`);
    const revision = Number(res.headers.get("X-Revision") ?? "0");
    return { data: new Uint8Array(await res.arrayBuffer()), revision };
  }

  async submitStroke(id: string, frame: number, stroke: Stroke, revision: number):
      Promise<{ ok: true; revision: number } | { ok: false; status: 409; revision: number }> {
    const res = await fetch(`${this.base}/pullbacks/${id}/edits`, {
      method: "POST",
      headers: { "Content-Type": "application/json", "X-Revision": String(revision) },
      body: JSON.stringify({ frame, ...stroke }),
    });
    if (res.status === 409) {
      const body = await res.json();
      return { ok: false, status: 409, revision: body.revision };
    }
    if (!res.ok) throw new Error(`edit failed: ${res.status}`);
    return { ok: true, revision: (await res.json()).revision };
  }

  async analyze(id: string, overrides: object = {}): Promise<string> {
    const res = await fetch(`${this.base}/pullbacks/${id}/analyze`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(overrides),
    });
    return (await this.json(res)).job_id;
  }

  async jobStatus(jobId: string): Promise<JobStatus> {
    return this.json(await fetch(`${this.base}/jobs/${jobId}`));
  }

  async struts(id: string): Promise<{ records: StrutRow[]; summary: object | null;
                                      contours: Record<string, number[]> }> {
    return this.json(await fetch(`${this.base}/pullbacks/${id}/struts`));
  }

  async register(body: object): Promise<RegistrationOutcome> {
    const res = await fetch(`${this.base}/registration`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return this.json(res);
  }

  quantCsvUrl(id: string): string {
    return `${this.base}/pullbacks/${id}/quant.csv`;
  }

  private async json(res: Response): Promise<any> {
    if (!res.ok) throw new Error(`request failed: ${res.status}`);
    return res.json();
  }
}
