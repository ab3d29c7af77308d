"""Local HTTP service for the viewer UI.

Exposes pullbacks, analysis jobs, frame/label access with optimistic
concurrency (revision counter per pullback), quantification, en face and
longitudinal views, struts, and registration. Label writes are serialized
per pullback; an edit transcript is appended so replaying it over the
automated labels reproduces the current labels exactly.
"""

from __future__ import annotations

import io
import json
import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Header, Query, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image

from . import container, quant, raster, registration
from .config import load_config
from .errors import DegenerateSignal, InvalidLandmarks, OctopusError
from .model import LABEL_COLORS, Pullback, polar_to_cartesian
from .pipeline import AnalysisJob, JobQueue, quant_csv_text

OVERLAY_ALPHA = 0.45


class PullbackState:
    """Mutable per-pullback server state: labels, revision, transcript."""

    def __init__(self, path: Path):
        self.path = path
        self.id = path.name
        self.lock = threading.Lock()
        self.pullback: Pullback = container.load_pullback(path)
        self.labels = self._load_labels()
        self.revision = self._load_revision()
        self.analysis_dir = path / "analysis"
        self.analyzing = False
        if not (path / "labels_auto.raw").is_file():
            self.labels.tofile(path / "labels_auto.raw")

    def _load_labels(self) -> np.ndarray:
        if (self.path / container.LABELS_NAME).is_file():
            return container.load_labels(self.path, self.pullback).copy()
        p = self.pullback
        return np.zeros((p.n_frames, p.n_alines, p.n_r), dtype=np.uint8)

    def _load_revision(self) -> int:
        rev_path = self.path / "rev.json"
        if rev_path.is_file():
            return int(json.loads(rev_path.read_text())["revision"])
        return 0

    def persist(self):
        container.save_labels(self.labels, self.path)
        (self.path / "rev.json").write_text(json.dumps({"revision": self.revision}))

    def append_transcript(self, entry: dict):
        entry = dict(entry)
        entry["revision"] = self.revision
        entry["ts"] = time.time()
        with open(self.path / "edits.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")

    def meta(self) -> dict:
        p = self.pullback
        return {
            "id": self.id,
            "n_frames": p.n_frames,
            "n_alines": p.n_alines,
            "n_r": p.n_r,
            "r_pixel_um": p.calibration.r_pixel_um,
            "frame_spacing_mm": p.calibration.frame_spacing_mm,
            "z_offset_px": p.calibration.z_offset_px,
            "revision": self.revision,
        }


def replay_transcript(auto_labels: np.ndarray, transcript_path: Path) -> np.ndarray:
    """Apply every recorded edit over the automated labels."""
    labels = auto_labels.copy()
    if not transcript_path.is_file():
        return labels
    with open(transcript_path, encoding="utf-8") as fh:
        for line in fh:
            entry = json.loads(line)
            f = entry["frame"]
            if entry["tool"] == "raw":
                idx = np.asarray(entry["diff_idx"], dtype=np.int64)
                val = np.asarray(entry["diff_val"], dtype=np.uint8)
                flat = labels[f].reshape(-1)
                flat[idx] = val
            else:
                labels[f] = raster.apply_stroke(labels[f], entry)
    return labels


def _gray_to_rgb(img: np.ndarray) -> np.ndarray:
    g = (img.astype(np.float32) / max(float(img.max()), 1.0) * 255.0).astype(np.uint8)
    return np.stack([g, g, g], axis=-1)


def _overlay_labels(rgb: np.ndarray, labels: np.ndarray) -> np.ndarray:
    out = rgb.astype(np.float32)
    for cls, color in LABEL_COLORS.items():
        mask = labels == cls
        if mask.any():
            out[mask] = (1 - OVERLAY_ALPHA) * out[mask] + OVERLAY_ALPHA * np.array(color)
    return out.astype(np.uint8)


def _png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    (Image.fromarray(arr)).save(buf, format="PNG")
    return buf.getvalue()


def create_app(workspace: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    root = Path(workspace)
    states: dict[str, PullbackState] = {}
    queue = JobQueue()
    worker_stop = threading.Event()

    def state_of(pid: str) -> PullbackState | None:
        if pid not in states:
            path = root / pid
            if not (path / container.META_NAME).is_file():
                return None
            states[pid] = PullbackState(path)
        return states[pid]

    def worker():
        while not worker_stop.is_set():
            job = queue.run_next()
            if job is None:
                worker_stop.wait(0.05)

    worker_thread = threading.Thread(target=worker, daemon=True)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        worker_thread.start()
        yield
        worker_stop.set()

    app = FastAPI(title="octopus", version="0.1.0", lifespan=lifespan)

    @app.exception_handler(OctopusError)
    def _octopus_error(_req: Request, exc: OctopusError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/pullbacks")
    def list_pullbacks():
        out = []
        for path in sorted(root.iterdir()) if root.is_dir() else []:
            if path.is_dir() and (path / container.META_NAME).is_file():
                st = state_of(path.name)
                if st:
                    out.append(st.meta())
        return out

    @app.get("/pullbacks/{pid}")
    def get_pullback(pid: str):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        return st.meta()

    @app.post("/pullbacks/{pid}/analyze")
    def analyze(pid: str, overrides: dict = Body(default={})):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        config = load_config(overrides if overrides else None)
        job = AnalysisJob(pullback_path=str(st.path), out_dir=str(st.analysis_dir),
                          config=config)
        st.analyzing = True

        def finish(j: AnalysisJob):
            # reload labels produced by the run and bump the revision
            with st.lock:
                if j.status == "done" and (st.analysis_dir / container.LABELS_NAME).is_file():
                    st.labels = container.load_labels(st.analysis_dir, st.pullback).copy()
                    auto = st.path / "labels_auto.raw"
                    st.labels.tofile(auto)
                    (st.path / "edits.jsonl").unlink(missing_ok=True)
                    st.revision += 1
                    st.persist()
                st.analyzing = False

        job.on_complete = finish
        queue.submit(job)
        return {"job_id": job.job_id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = queue.get(job_id)
        if job is None:
            return JSONResponse(status_code=404, content={"detail": "unknown job"})
        return {"job_id": job.job_id, "status": job.status, "stage": job.stage,
                "progress": job.progress, "error": job.error, "timings": job.timings}

    @app.get("/pullbacks/{pid}/frames/{n}")
    def frame_png(pid: str, n: int, view: str = Query("xy"), overlay: int = Query(0),
                  size: int = Query(800)):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        if not 0 <= n < st.pullback.n_frames:
            return JSONResponse(status_code=404, content={"detail": "frame out of range"})
        frame = st.pullback.pixels[n]
        labels = st.labels[n]
        if view == "xy":
            img = polar_to_cartesian(frame, st.pullback.calibration, size)
            lab = polar_to_cartesian(labels, st.pullback.calibration, size, is_labels=True)
        elif view == "rtheta":
            img, lab = frame, labels
        else:
            return JSONResponse(status_code=422, content={"detail": "view must be xy|rtheta"})
        rgb = _gray_to_rgb(img)
        if overlay:
            rgb = _overlay_labels(rgb, lab)
        return Response(content=_png_bytes(rgb), media_type="image/png",
                        headers={"X-Revision": str(st.revision)})

    @app.get("/pullbacks/{pid}/labels/{n}")
    def get_labels(pid: str, n: int):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        if not 0 <= n < st.pullback.n_frames:
            return JSONResponse(status_code=404, content={"detail": "frame out of range"})
        return Response(content=st.labels[n].tobytes(), media_type="application/octet-stream",
                        headers={"X-Revision": str(st.revision)})

    @app.put("/pullbacks/{pid}/labels/{n}")
    async def put_labels(pid: str, n: int, request: Request,
                         x_revision: int = Header(...)):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        if st.analyzing:
            return JSONResponse(status_code=503,
                                content={"detail": "analysis in progress"})
        if not 0 <= n < st.pullback.n_frames:
            return JSONResponse(status_code=404, content={"detail": "frame out of range"})
        body = await request.body()
        expected = st.pullback.n_alines * st.pullback.n_r
        if len(body) != expected:
            return JSONResponse(status_code=422,
                                content={"detail": f"expected {expected} bytes"})
        new = np.frombuffer(body, dtype=np.uint8).reshape(
            st.pullback.n_alines, st.pullback.n_r)
        if new.max(initial=0) > 5:
            return JSONResponse(status_code=422, content={"detail": "label code > 5"})
        with st.lock:
            if x_revision != st.revision:
                return JSONResponse(status_code=409,
                                    content={"detail": "stale revision",
                                             "revision": st.revision})
            diff = np.flatnonzero(st.labels[n].reshape(-1) != new.reshape(-1))
            st.labels[n] = new
            st.revision += 1
            st.append_transcript({
                "frame": n, "tool": "raw",
                "diff_idx": diff.tolist(),
                "diff_val": new.reshape(-1)[diff].tolist(),
            })
            st.persist()
            return {"revision": st.revision}

    @app.post("/pullbacks/{pid}/edits")
    def post_edit(pid: str, edit: dict = Body(...), x_revision: int = Header(...)):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        if st.analyzing:
            return JSONResponse(status_code=503,
                                content={"detail": "analysis in progress"})
        n = int(edit.get("frame", -1))
        if not 0 <= n < st.pullback.n_frames:
            return JSONResponse(status_code=404, content={"detail": "frame out of range"})
        tool = edit.get("tool")
        if tool not in ("brush", "freehand", "fill"):
            return JSONResponse(status_code=422, content={"detail": "unknown tool"})
        if not edit.get("points"):
            return JSONResponse(status_code=422, content={"detail": "points required"})
        with st.lock:
            if x_revision != st.revision:
                return JSONResponse(status_code=409,
                                    content={"detail": "stale revision",
                                             "revision": st.revision})
            st.labels[n] = raster.apply_stroke(st.labels[n], edit)
            st.revision += 1
            st.append_transcript({k: edit[k] for k in
                                  ("frame", "tool", "cls", "points", "radius")
                                  if k in edit})
            st.persist()
            return {"revision": st.revision}

    @app.get("/pullbacks/{pid}/quant.csv")
    def quant_csv(pid: str):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        quants = []
        cal = st.pullback.calibration
        for f in range(st.pullback.n_frames):
            contour = quant.contour_from_labels(st.labels[f])
            gated = bool((st.labels[f] == 2).any())
            quants.append(quant.frame_quant(f, st.labels[f], contour, cal, gated=gated))
        return Response(content=quant_csv_text(quants), media_type="text/csv",
                        headers={"X-Revision": str(st.revision)})

    @app.get("/pullbacks/{pid}/enface")
    def enface(pid: str, map: str = Query("angle"), bins: int = Query(360)):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        if map not in ("angle", "thickness", "depth"):
            return JSONResponse(status_code=422,
                                content={"detail": "map must be angle|thickness|depth"})
        cal = st.pullback.calibration
        contours = [quant.contour_from_labels(st.labels[f])
                    for f in range(st.pullback.n_frames)]
        maps = quant.enface_maps(st.labels, contours, cal, bins)
        if map == "angle":
            values, vmax = maps.presence.astype(np.float64), 1.0
        elif map == "thickness":
            values, vmax = maps.thickness_mm, 1.5
        else:
            values, vmax = maps.depth_mm, 1.0
        scaled = np.clip(np.nan_to_num(values, nan=0.0) / vmax, 0, 1)
        return Response(content=_png_bytes((scaled * 255).astype(np.uint8)),
                        media_type="image/png",
                        headers={"X-Revision": str(st.revision)})

    @app.get("/pullbacks/{pid}/longitudinal")
    def longitudinal(pid: str, angle: float = Query(0.0), overlay: int = Query(1)):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        img, strip = quant.longitudinal_view(st.pullback, st.labels, angle)
        rgb = _gray_to_rgb(img)
        if overlay:
            rgb = _overlay_labels(rgb, strip)
        return Response(content=_png_bytes(rgb), media_type="image/png",
                        headers={"X-Revision": str(st.revision)})

    @app.get("/pullbacks/{pid}/struts")
    def struts(pid: str):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        report = st.analysis_dir / "stent_report.csv"
        summary_path = st.analysis_dir / "stent_summary.json"
        records = []
        if report.is_file():
            lines = report.read_text(encoding="utf-8").strip().split("\n")
            header = lines[0].split(",")
            for line in lines[1:]:
                if line:
                    records.append(dict(zip(header, line.split(","))))
        summary = json.loads(summary_path.read_text()) if summary_path.is_file() else None
        contours_path = st.analysis_dir / "stent_contours.json"
        contours = json.loads(contours_path.read_text()) if contours_path.is_file() else {}
        return {"records": records, "summary": summary, "contours": contours}

    @app.get("/pullbacks/{pid}/annotations/{n}")
    def get_annotations(pid: str, n: int):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        path = st.path / "annotations.json"
        doc = json.loads(path.read_text()) if path.is_file() else {}
        return doc.get(str(n), [])

    @app.put("/pullbacks/{pid}/annotations/{n}")
    def put_annotations(pid: str, n: int, items: list = Body(...)):
        st = state_of(pid)
        if st is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        if not 0 <= n < st.pullback.n_frames:
            return JSONResponse(status_code=404, content={"detail": "frame out of range"})
        path = st.path / "annotations.json"
        with st.lock:
            doc = json.loads(path.read_text()) if path.is_file() else {}
            doc[str(n)] = items
            path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
        return {"frame": n, "count": len(items)}

    @app.post("/registration")
    def register(body: dict = Body(...)):
        mode = body.get("mode", "automatic")
        if mode == "landmark":
            lm = body.get("landmarks")
            if not lm:
                return JSONResponse(status_code=422,
                                    content={"detail": "landmarks required"})
            try:
                result = registration.register_landmark(
                    tuple(lm["ref"]), tuple(lm["float"]))
            except InvalidLandmarks as exc:
                return JSONResponse(status_code=422, content={"detail": str(exc)})
            return result.to_dict()
        ref = state_of(body.get("ref", ""))
        flt = state_of(body.get("float", ""))
        if ref is None or flt is None:
            return JSONResponse(status_code=404, content={"detail": "unknown pullback"})
        sig_ref = registration.thickness_signal(ref.labels, ref.pullback.calibration, ref.id)
        sig_flt = registration.thickness_signal(flt.labels, flt.pullback.calibration, flt.id)
        try:
            result = registration.register_auto(
                sig_ref, sig_flt, body.get("max_offset"),
                min_overlap=body.get("min_overlap", registration.MIN_OVERLAP))
        except DegenerateSignal as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        return result.to_dict()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    app.state.queue = queue
    app.state.states = states
    return app
