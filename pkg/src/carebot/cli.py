"""Command-line entry points: serve, replay, bench-latency, detect, gesture."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .frames import load_image
from .gesture import GestureParams
from .session import ServiceConfig, SessionManager, bench_latency, replay
from .synth import run_gesture_pipeline
from .vision import DetectParams, DetectionBox, detect_faces, load_cascade


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    config = ServiceConfig.from_file(args.config) if args.config else ServiceConfig()
    app = create_app(SessionManager(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


def cmd_replay(args):
    result = replay(args.log)
    report = {
        "events_applied": result.events_applied,
        "final_state": result.ms.state,
        "divergences": [
            {"seq": d.seq, "field": d.field_name,
             "recorded": d.recorded, "recomputed": d.recomputed}
            for d in result.divergences
        ],
    }
    print(json.dumps(report, indent=2))
    return 1 if result.divergences else 0


def cmd_bench(args):
    result = bench_latency(args.turns, delay_model=args.delay_model,
                           seed=args.seed, force_live=args.force)
    out = {k: result[k] for k in ("n_turns", "p50_ms", "p90_ms", "histogram")}
    print(json.dumps(out, indent=2))
    return 0


def cmd_detect(args):
    with open(args.cascade) as f:
        cascade = load_cascade(f.read())
    frame = load_image(args.image)
    params = DetectParams(scale_factor=args.scale_factor, step=args.step,
                          min_neighbors=args.min_neighbors)
    boxes = detect_faces(cascade, frame, params)
    print(json.dumps([
        {"x": b.x, "y": b.y, "w": b.w, "h": b.h,
         "score": b.score, "neighbors": b.neighbors}
        for b in boxes
    ], indent=2))
    return 0


def cmd_gesture(args):
    names = sorted(n for n in os.listdir(args.framedir)
                   if n.endswith((".pgm", ".png")))
    if len(names) < 2:
        print("need at least two frames", file=sys.stderr)
        return 2
    frames = []
    for i, name in enumerate(names):
        frame = load_image(os.path.join(args.framedir, name),
                           t_ms=i * args.frame_interval_ms)
        frames.append(frame)
    x, y, w, h = (int(v) for v in args.face_box.split(","))
    box = DetectionBox(x=x, y=y, w=w, h=h, score=0.0, neighbors=1)
    params = GestureParams(window_ms=min(
        GestureParams().window_ms,
        (len(frames) - 1) * args.frame_interval_ms))
    verdict = run_gesture_pipeline(frames, box, gesture_params=params)
    print(json.dumps(verdict.to_dict()))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="carebot")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--config", help="JSON config file")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="replay a session log and report divergence")
    p.add_argument("log")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench-latency", help="measure turn latency with injected delays")
    p.add_argument("--turns", type=int, default=25)
    p.add_argument("--delay-model", default="uniform:5000,10000")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true",
                   help="allow a live (non-stub) endpoint")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("detect", help="detect faces in an image")
    p.add_argument("image")
    p.add_argument("--cascade", required=True)
    p.add_argument("--scale-factor", type=float, default=1.1)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--min-neighbors", type=int, default=3)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("gesture", help="classify head gesture from a frame directory")
    p.add_argument("framedir")
    p.add_argument("--face-box", default="0,0,64,64", help="x,y,w,h")
    p.add_argument("--frame-interval-ms", type=int, default=100)
    p.set_defaults(func=cmd_gesture)

    args = parser.parse_args(argv)
    return args.func(args) or 0


if __name__ == "__main__":
    sys.exit(main())
