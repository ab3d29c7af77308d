"""Command-line interface.

Exit codes: 0 success, 2 container/format error, 3 pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import container
from .config import load_config
from .errors import ConfigError, FormatError, OctopusError, SpecInvalid, VersionMismatch

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_PIPELINE = 3

_MODE_ALIASES = {"baseline": "baseline", "followup": "follow_up", "stent": "stent_analysis"}


def _cmd_phantom(args) -> int:
    from . import phantom

    spec_dict = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    try:
        spec = phantom.PhantomSpec.from_dict(spec_dict)
        pullback, truth = phantom.generate(spec, args.seed)
    except (SpecInvalid, TypeError) as exc:
        print(f"invalid phantom spec: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    out = Path(args.out)
    container.save_pullback(pullback, out)
    container.save_labels(truth.labels, out)
    truth_doc = {
        "seed": args.seed,
        "spec": spec.to_dict(),
        "band_lower": None if truth.band_lower is None else truth.band_lower.tolist(),
        "band_upper": None if truth.band_upper is None else truth.band_upper.tolist(),
        "struts": [vars(t) for t in truth.struts],
        "frame_quant": [vars(q) for q in truth.frame_quant],
    }
    (out / "truth.json").write_text(json.dumps(truth_doc, indent=2, sort_keys=True,
                                               default=float) + "\n", encoding="utf-8")
    print(f"wrote phantom pullback {pullback.id!r} to {out}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    from .pipeline import AnalysisJob, JobQueue

    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.mode:
        overrides["mode"] = _MODE_ALIASES[args.mode]
    if args.roi:
        a, b = args.roi.split(":")
        overrides["roi"] = [int(a), int(b)]
    try:
        config = load_config(overrides if overrides else None)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    out_dir = args.out or str(Path(args.pullback) / "analysis")
    try:
        container.load_pullback(args.pullback)  # format check up front
    except (FormatError, VersionMismatch) as exc:
        print(f"container error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    queue = JobQueue()
    job = queue.submit(AnalysisJob(pullback_path=args.pullback, out_dir=out_dir,
                                   config=config))
    queue.run_next()
    if job.status != "done":
        print(f"pipeline failed: {job.error}", file=sys.stderr)
        return EXIT_PIPELINE
    print(json.dumps({"job": job.job_id, "out": out_dir,
                      "timings_s": {k: round(v, 3) for k, v in job.timings.items()}}))
    return EXIT_OK


def _cmd_report(args) -> int:
    from . import quant
    from .pipeline import lesion_csv_text, quant_csv_text

    try:
        pullback = container.load_pullback(args.pullback)
        labels_dir = Path(args.labels) if args.labels else Path(args.pullback)
        labels = container.load_labels(labels_dir, pullback)
    except (FormatError, VersionMismatch) as exc:
        print(f"container error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    cal = pullback.calibration
    quants = []
    import numpy as np

    for f in range(pullback.n_frames):
        contour = quant.contour_from_labels(labels[f])
        gated = bool((labels[f] == 2).any())
        quants.append(quant.frame_quant(f, labels[f], contour, cal, gated=gated))
    gated = np.array([q.gated for q in quants], dtype=bool)
    lesions = quant.lesion_quant(quants, gated, cal)
    out = Path(args.out or args.pullback)
    out.mkdir(parents=True, exist_ok=True)
    (out / "quant_frames.csv").write_text(quant_csv_text(quants), encoding="utf-8")
    (out / "quant_lesions.csv").write_text(lesion_csv_text(lesions), encoding="utf-8")
    print(f"wrote quant CSVs to {out}")
    return EXIT_OK


def _cmd_register(args) -> int:
    from . import registration

    try:
        ref = container.load_pullback(args.ref)
        flt = container.load_pullback(args.float)
        ref_labels = container.load_labels(Path(args.ref), ref)
        flt_labels = container.load_labels(Path(args.float), flt)
    except (FormatError, VersionMismatch) as exc:
        print(f"container error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    try:
        if args.landmarks:
            ref_part, float_part = args.landmarks.split(":")
            r1, r2 = (int(x) for x in ref_part.split(","))
            f1, f2 = (int(x) for x in float_part.split(","))
            result = registration.register_landmark((r1, r2), (f1, f2))
        else:
            sig_ref = registration.thickness_signal(ref_labels, ref.calibration, ref.id)
            sig_flt = registration.thickness_signal(flt_labels, flt.calibration, flt.id)
            result = registration.register_auto(sig_ref, sig_flt, args.max_offset,
                                                min_overlap=args.min_overlap)
    except OctopusError as exc:
        print(f"registration failed: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    doc = result.to_dict()
    print(json.dumps(doc, indent=2))
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.root, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="octopus",
                                     description="IVOCT plaque and stent analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic pullback with ground truth")
    p.add_argument("--spec", required=True, help="phantom spec JSON file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output container directory")
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("analyze", help="run the analysis pipeline on a pullback")
    p.add_argument("pullback", help="pullback container directory")
    p.add_argument("--config", help="config JSON overriding defaults")
    p.add_argument("--mode", choices=sorted(_MODE_ALIASES))
    p.add_argument("--roi", help="start:end frame range (inclusive)")
    p.add_argument("--out", help="artifact directory (default <pullback>/analysis)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("report", help="recompute quant CSVs from stored labels")
    p.add_argument("pullback")
    p.add_argument("--labels", help="directory holding labels.raw (default: pullback)")
    p.add_argument("--out", help="output directory (default: pullback)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("register", help="co-register two pullbacks")
    p.add_argument("--ref", required=True)
    p.add_argument("--float", required=True)
    p.add_argument("--landmarks", help="r1,r2:f1,f2 frame pairs for landmark mode")
    p.add_argument("--max-offset", type=int, default=None)
    p.add_argument("--min-overlap", type=int, default=25)
    p.add_argument("--out", default="reg.json")
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("serve", help="start the local HTTP service")
    p.add_argument("--root", default=".", help="workspace directory of containers")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", default=None, help="static UI asset directory")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
