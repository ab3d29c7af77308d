/**
 * Analyst workstation bootstrap: layout modes, viewer wiring, editing tools,
 * measurements, registration controls, and the analysis runner.
 */

import { ApiClient, PullbackMeta } from "./api.js";
import { EditorSession } from "./editor.js";
import { EDIT_CLASSES } from "./palette.js";
import { LongitudinalPanel, EnFacePanel } from "./panels.js";
import { SyncController, ViewerBinding } from "./sync.js";
import { CrossSectionViewer, EditController } from "./viewer.js";
import { spanMm } from "./measure.js";

type Mode = "baseline" | "follow_up_2" | "follow_up_3" | "follow_up_4" | "stent_analysis";

const MODE_VIEWERS: Record<Mode, number> = {
  baseline: 1, follow_up_2: 2, follow_up_3: 3, follow_up_4: 4, stent_analysis: 1,
};

class App {
  private api = new ApiClient("");
  private pullbacks: PullbackMeta[] = [];
  private viewers: CrossSectionViewer[] = [];
  private editors: EditController[] = [];
  private longs: LongitudinalPanel[] = [];
  private enface: EnFacePanel | null = null;
  private sync = new SyncController();
  private mode: Mode = "baseline";
  private statusEl = document.getElementById("status")!;
  private resultEl = document.getElementById("measure-result")!;
  private gridEl = document.getElementById("grid")!;
  private banner = document.getElementById("offline-banner")!;

  async start(): Promise<void> {
    try {
      this.pullbacks = await this.api.listPullbacks();
      this.banner.hidden = true;
    } catch {
      this.banner.hidden = false;
      setTimeout(() => this.start(), 2000);
      return;
    }
    this.buildControls();
    await this.setMode("baseline");
    window.addEventListener("keydown", (ev) => this.onKey(ev));
  }

  private buildControls(): void {
    const select = document.getElementById("mode") as HTMLSelectElement;
    select.addEventListener("change", () => this.setMode(select.value as Mode));
    (document.getElementById("run") as HTMLButtonElement)
      .addEventListener("click", () => this.runAnalysis());
    (document.getElementById("pb-sync") as HTMLButtonElement)
      .addEventListener("click", () => this.registerToViewer1());
    (document.getElementById("save") as HTMLButtonElement)
      .addEventListener("click", () => this.editors.forEach((e) => e.save()));
    (document.getElementById("undo") as HTMLButtonElement)
      .addEventListener("click", () => this.editors.forEach((e) => e.undo()));
    const toolSel = document.getElementById("tool") as HTMLSelectElement;
    const clsSel = document.getElementById("cls") as HTMLSelectElement;
    for (const { code, name } of EDIT_CLASSES) {
      const opt = document.createElement("option");
      opt.value = String(code);
      opt.textContent = name;
      clsSel.append(opt);
    }
    const radius = document.getElementById("radius") as HTMLInputElement;
    const applyTool = () => this.editors.forEach((e) => {
      e.tool = toolSel.value as "brush" | "freehand" | "fill";
      e.cls = Number(clsSel.value);
      e.radius = Number(radius.value);
    });
    toolSel.addEventListener("change", applyTool);
    clsSel.addEventListener("change", applyTool);
    radius.addEventListener("change", applyTool);
    for (const kind of ["off", "angle", "length"] as const) {
      document.getElementById(`measure-${kind}`)!.addEventListener(
        "click", () => this.viewers.forEach((v) => (v.measureMode = kind)));
    }
    (document.getElementById("overlay") as HTMLInputElement)
      .addEventListener("change", (ev) => {
        const on = (ev.target as HTMLInputElement).checked;
        this.viewers.forEach((v) => { v.overlay = on; v.refresh(); });
      });
    (document.getElementById("view") as HTMLSelectElement)
      .addEventListener("change", (ev) => {
        const view = (ev.target as HTMLSelectElement).value as "xy" | "rtheta";
        this.viewers.forEach((v) => { v.view = view; v.refresh(); });
      });
  }

  private async setMode(mode: Mode): Promise<void> {
    this.mode = mode;
    const count = Math.min(MODE_VIEWERS[mode], this.pullbacks.length);
    this.gridEl.innerHTML = "";
    this.viewers = [];
    this.editors = [];
    this.longs = [];
    const bindings: ViewerBinding[] = [];
    for (let i = 0; i < count; i++) {
      const meta = this.pullbacks[i];
      const viewer = new CrossSectionViewer(this.api, meta, mode === "baseline" ? 560 : 380);
      const session = new EditorSession({
        fetchLabels: (frame) => this.api.fetchLabels(meta.id, frame),
        submitStroke: (frame, stroke, revision) =>
          this.api.submitStroke(meta.id, frame, stroke, revision),
      }, meta.n_alines, meta.n_r);
      this.editors.push(new EditController(viewer, session));
      const long = new LongitudinalPanel(this.api, meta, mode === "baseline" ? 760 : 380);
      viewer.onAngleChange = (deg) => long.setAngle(deg);
      viewer.onFrameChange = (frame) => {
        const positions = this.sync.scrubFrom(i, frame);
        this.applyPositions(positions);
      };
      viewer.onMeasure = (text) => (this.resultEl.textContent = text);
      long.onSeek = (frame) => viewer.setFrame(frame);
      const cell = document.createElement("div");
      cell.className = "cell";
      const title = document.createElement("div");
      title.className = "cell-title";
      title.textContent = `${i + 1}: ${meta.id}`;
      cell.append(title, viewer.canvas, long.canvas);
      this.gridEl.append(cell);
      this.viewers.push(viewer);
      this.longs.push(long);
      bindings.push({ pullbackId: meta.id, nFrames: meta.n_frames, offsetFrames: 0 });
      await viewer.refresh();
      await long.setAngle(0);
      if (mode === "stent_analysis") await this.loadStruts(viewer);
    }
    this.sync.setBindings(bindings);
    this.sync.onChange(() => undefined);
    if (mode === "baseline" && this.pullbacks.length) {
      this.enface = new EnFacePanel(this.api, this.pullbacks[0]);
      this.enface.onSeek = (frame) => this.viewers[0]?.setFrame(frame);
      document.getElementById("side")!.innerHTML = "";
      document.getElementById("side")!.append(this.enface.root);
      await this.enface.refresh();
    }
    this.status(`${mode} mode, ${count} viewer(s)`);
  }

  private applyPositions(positions: { frame: number }[]): void {
    positions.forEach((pos, i) => {
      if (this.viewers[i] && this.viewers[i].frame !== pos.frame) {
        this.viewers[i].showFrame(pos.frame);
      }
      this.longs[i]?.setCursor(pos.frame);
    });
    this.enface?.setCursor(positions[0]?.frame ?? 0);
    if (positions.length >= 2) {
      const z = spanMm(0, positions[0].frame, this.pullbacks[0].frame_spacing_mm);
      this.status(`z = ${z.toFixed(1)} mm`);
    }
  }

  private async loadStruts(viewer: CrossSectionViewer): Promise<void> {
    const { records, contours } = await this.api.struts(viewer.meta.id);
    viewer.struts = records.map((r) => ({
      frame: Number(r.frame), aline: Number(r.aline),
      radiusPx: Number(r.radius_px), covered: r.covered === "1",
    }));
    viewer.stentContours = contours ?? {};
    viewer.draw();
  }

  private async registerToViewer1(): Promise<void> {
    if (this.viewers.length < 2) return;
    for (let i = 1; i < this.viewers.length; i++) {
      const res = await this.api.register({
        ref: this.viewers[0].meta.id, float: this.viewers[i].meta.id,
      }).catch(() => null);
      if (res) {
        this.sync.setOffset(i, res.offset_frames);
        this.status(`viewer ${i + 1} offset ${res.offset_frames} ` +
                    `(corr ${res.peak_correlation.toFixed(3)})`);
      } else {
        this.status(`automatic registration failed for viewer ${i + 1}; ` +
                    `pick landmarks instead`);
      }
    }
  }

  private async runAnalysis(): Promise<void> {
    const meta = this.viewers[0]?.meta;
    if (!meta) return;
    const mode = this.mode === "stent_analysis" ? "stent_analysis" : "baseline";
    const jobId = await this.api.analyze(meta.id, { mode });
    this.status("analysis queued…");
    const poll = async () => {
      const st = await this.api.jobStatus(jobId);
      this.status(`${st.status} ${st.stage} ${(st.progress * 100).toFixed(0)}%`);
      if (st.status === "done") {
        await this.viewers[0].refresh();
        await this.enface?.refresh();
        if (this.mode === "stent_analysis") await this.loadStruts(this.viewers[0]);
        return;
      }
      if (st.status === "failed") {
        this.status(`analysis failed: ${st.error}`);
        return;
      }
      setTimeout(poll, 400);
    };
    poll();
  }

  private onKey(ev: KeyboardEvent): void {
    if (ev.key === "ArrowRight") this.viewers[0]?.setFrame(this.viewers[0].frame + 1);
    if (ev.key === "ArrowLeft") this.viewers[0]?.setFrame(this.viewers[0].frame - 1);
    if (ev.key === "z" && (ev.ctrlKey || ev.metaKey)) this.editors.forEach((e) => e.undo());
    if (ev.key === "y" && (ev.ctrlKey || ev.metaKey)) this.editors.forEach((e) => e.redo());
  }

  private status(text: string): void {
    this.statusEl.textContent = text;
  }
}

new App().start();
