"""Command line front end: run the server, dump frames, run the benchmark.

Exit codes: 0 success, 1 usage error, 2 runtime failure. The port for
`serve` can also come from the VIEWSIM_PORT environment variable; an
explicit --port wins.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import threading
from pathlib import Path

from .bench import BENCH_RESOLUTIONS, benchmark_flow, write_timings_csv
from .catalog import builtin_scenes
from .imageio import save_png, write_flo
from .render import CameraIntrinsics, CameraMotion, SceneGeometry, flow_to_hsv, render_views
from .scene import Scene, SceneParseError, SceneValidationError, load_scene
from .server import DEFAULT_PORT, Server, ServerConfig
from .world import World

PORT_ENV = "VIEWSIM_PORT"
DUMP_VIEWS = ("main", "category", "object", "flow", "depth")


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for runtime failures here
    def error(self, message):
        raise UsageError(message)


def _resolve_scene(name_or_path: str, seed: int | None) -> Scene:
    """A builtin scene name, or a path to a scene JSON file."""
    for scene in builtin_scenes():
        if scene.name == name_or_path:
            break
    else:
        path = Path(name_or_path)
        if path.suffix != ".json" and not path.exists():
            names = ", ".join(s.name for s in builtin_scenes())
            raise UsageError(f"unknown scene {name_or_path!r} (builtins: {names})")
        scene = _load_scene_file(path)
    if seed is not None:
        scene = dataclasses.replace(scene, seed=seed)
    return scene


def _load_scene_file(path: Path) -> Scene:
    try:
        return load_scene(path)
    except (OSError, SceneParseError, SceneValidationError) as exc:
        raise RuntimeFailure(f"cannot load scene {path}: {exc}") from exc


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"resolution must look like 320x240, got {text!r}")
    if w <= 0 or h <= 0:
        raise UsageError(f"resolution must be positive, got {text!r}")
    return w, h


def cmd_serve(args) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    if args.port is not None:
        port = args.port
    else:
        raw = os.environ.get(PORT_ENV)
        try:
            port = int(raw) if raw is not None else DEFAULT_PORT
        except ValueError:
            raise UsageError(f"{PORT_ENV} must be an integer, got {raw!r}")
    if args.tick_rate <= 0:
        raise UsageError("--tick-rate must be positive")
    if args.scene:
        scenes = [_load_scene_file(Path(p)) for p in args.scene]
    else:
        scenes = builtin_scenes()
    if args.seed is not None:
        scenes = [dataclasses.replace(s, seed=args.seed) for s in scenes]
    config = ServerConfig(host=args.bind, port=port, tick_rate=args.tick_rate, scenes=scenes)
    try:
        server = Server(config)
        server.start()
    except OSError as exc:
        raise RuntimeFailure(f"cannot listen on {args.bind}:{port}: {exc}") from exc
    print(f"listening on {config.host}:{server.port}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def cmd_dump(args) -> int:
    if args.seconds <= 0:
        raise UsageError("--seconds must be positive")
    if args.fps <= 0 or args.fps > args.tick_rate:
        raise UsageError("--fps must be in (0, tick rate]")
    width, height = _parse_resolution(args.resolution)
    scene = _resolve_scene(args.scene, args.seed)

    # local world stepping; the camera rides the scene's mover like a
    # following agent would
    geometry = SceneGeometry(scene)
    world = World(scene)
    cam = scene.camera
    intr = CameraIntrinsics.from_fov(width, height, cam.fov_deg, cam.near, cam.far)
    outdir = Path(args.outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeFailure(f"cannot create {outdir}: {exc}") from exc

    stride = max(1, round(args.tick_rate / args.fps))
    count = round(args.seconds * args.fps)
    dt = 1.0 / args.tick_rate
    tick = 0
    try:
        for index in range(count):
            while tick < index * stride:
                world.step(dt)
                tick += 1
            snap = world.snapshot()
            camera = CameraMotion(
                snap.mover_position,
                snap.mover_orientation,
                snap.mover_linear_velocity,
                snap.mover_angular_velocity,
            )
            views = render_views(geometry, snap, camera, intr, views=DUMP_VIEWS)
            stem = outdir / f"t{tick:06d}"
            save_png(f"{stem}_main.png", views["main"])
            save_png(f"{stem}_category.png", views["category"])
            save_png(f"{stem}_object.png", views["object"])
            save_png(f"{stem}_depth.png", views["depth"])
            save_png(f"{stem}_flow_hsv.png", flow_to_hsv(views["flow"]))
            write_flo(f"{stem}_flow.flo", views["flow"])
    except OSError as exc:
        raise RuntimeFailure(f"cannot write frames: {exc}") from exc
    print(f"wrote {count} sampled ticks to {outdir}", flush=True)
    return 0


def cmd_bench(args) -> int:
    if args.samples < 2:
        raise UsageError("--samples must be at least 2")
    scene = _resolve_scene(args.scene, args.seed)
    if args.resolution:
        resolutions = tuple(_parse_resolution(r) for r in args.resolution)
    else:
        resolutions = BENCH_RESOLUTIONS
    records = benchmark_flow(
        resolutions=resolutions, samples=args.samples, warmup=args.warmup, scene=scene
    )
    try:
        write_timings_csv(records, args.out)
    except OSError as exc:
        raise RuntimeFailure(f"cannot write {args.out}: {exc}") from exc
    for r in records:
        print(f"{r.resolution:>9} {r.method:<12} {r.mean_s * 1e3:8.2f} ms +/- {r.ci95_s * 1e3:.2f}")
    print(f"wrote {args.out}", flush=True)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="viewsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the frame server")
    serve.add_argument("--bind", default="127.0.0.1", help="address to listen on")
    serve.add_argument("--port", type=int, default=None,
                       help=f"TCP port (default {PORT_ENV} or {DEFAULT_PORT})")
    serve.add_argument("--tick-rate", type=float, default=60.0, help="simulation ticks per second")
    serve.add_argument("--scene", action="append", metavar="FILE",
                       help="scene JSON file (repeatable; default: built-in scenes)")
    serve.add_argument("--seed", type=int, default=None, help="override every scene's seed")
    serve.set_defaults(func=cmd_serve)

    dump = sub.add_parser("dump", help="render a scene's views to image files")
    dump.add_argument("scene", help="builtin scene name or scene JSON file")
    dump.add_argument("--seconds", type=float, default=1.0, help="simulated span to cover")
    dump.add_argument("--fps", type=float, default=10.0, help="sampled frames per second")
    dump.add_argument("--tick-rate", type=float, default=60.0, help="simulation ticks per second")
    dump.add_argument("--resolution", default="320x240", help="frame size as WxH")
    dump.add_argument("--outdir", default="frames", help="output directory")
    dump.add_argument("--seed", type=int, default=None, help="override the scene seed")
    dump.set_defaults(func=cmd_dump)

    bench = sub.add_parser("bench", help="time the analytic flow against block matching")
    bench.add_argument("--scene", default="optical", help="builtin scene name or scene JSON file")
    bench.add_argument("--samples", type=int, default=100, help="timed samples per method")
    bench.add_argument("--warmup", type=int, default=5, help="untimed warmup frames")
    bench.add_argument("--resolution", action="append", metavar="WxH",
                       help="frame size to time (repeatable; default: the standard six)")
    bench.add_argument("--out", default="timings.csv", help="CSV report path")
    bench.add_argument("--seed", type=int, default=None, help="override the scene seed")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help
        return 0 if not exc.code else 1


if __name__ == "__main__":
    sys.exit(main())
