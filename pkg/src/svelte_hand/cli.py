"""Operator and developer command line.

Subcommands: calibrate, demo, replay, grasp, twist, release, jog, serve,
export-frame.  Exit codes: 0 success, 2 validation/precondition failure,
3 calibration failure or replay divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .calibration import (
    CalibrationError,
    calibrate_geometry,
    geometry_from_dict,
    load_calibrated_geometry,
    load_geometry,
    save_geometry,
)
from .controller import GraspCommandConfig
from .geometry import GraspMode
from .service import ControlService, ServiceClient, ServiceConfig
from .tactile import (
    HexIndenter,
    SphereIndenter,
    SurfaceCoord,
    default_optics_map,
    render_contact,
    write_pgm,
)
from .world import DemoTask, run_demo, simulate_grasp, trace_to_jsonl

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3


def _parse_socket(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


def _geometry_from_args(args) -> "HandGeometry":
    if getattr(args, "geometry", None):
        return load_geometry(args.geometry)
    return load_calibrated_geometry()


def cmd_calibrate(args) -> int:
    try:
        result = calibrate_geometry(args.pinch, args.lateral, args.opposition)
    except CalibrationError as e:
        if args.json:
            print(json.dumps({"error": str(e), "best_rms": e.best_rms}))
        else:
            print(f"calibration failed: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    out = Path(args.out)
    save_geometry(result.geometry, out)
    payload = {
        "geometry_file": str(out),
        "finger_length": result.geometry.finger_length,
        "side_contact_offset": result.geometry.side_contact_offset,
        "motor_axis_separation": result.geometry.motor_axis_separation,
        "residuals_mm": list(result.residuals),
        "rms_mm": result.rms,
    }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"wrote {out}")
        print(
            "lengths: finger {finger_length:.3f} mm, side contact "
            "{side_contact_offset:.3f} mm, axis separation "
            "{motor_axis_separation:.3f} mm".format(**payload)
        )
        print(
            "residuals (pinch/lateral/opposition): "
            + " / ".join(f"{r:+.4f} mm" for r in result.residuals)
            + f"  (rms {result.rms:.4f} mm)"
        )
    return EXIT_OK


def cmd_demo(args) -> int:
    try:
        task = DemoTask(args.task)
    except ValueError:
        print(f"unknown demo task {args.task!r}; choose from: "
              + ", ".join(t.value for t in DemoTask), file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = Path(args.out) if args.out else Path(f"demo-{task.value}")
    geometry = _geometry_from_args(args)
    report = run_demo(task, out_dir, geometry=geometry)
    outcome = report.outcome.to_dict()
    if args.json:
        print(json.dumps({"out_dir": str(out_dir), "outcome": outcome,
                          "ticks": report.ticks}, indent=2))
    else:
        held = "held" if outcome["held"] else f"NOT held ({outcome['reason']})"
        fingers = sorted(c["finger"] for c in outcome["contacts"])
        print(f"{task.value}: {held}; contact fingers {fingers}; "
              f"{report.ticks} ticks; report in {out_dir}/")
    return EXIT_OK


def cmd_replay(args) -> int:
    trace_path = Path(args.trace)
    report_dir = trace_path.parent if trace_path.is_file() else trace_path
    trace_file = report_dir / "trace.jsonl"
    manifest_file = report_dir / "demo.json"
    if not trace_file.exists() or not manifest_file.exists():
        print(f"need trace.jsonl and demo.json in {report_dir}", file=sys.stderr)
        return EXIT_VALIDATION
    manifest = json.loads(manifest_file.read_text())
    config = GraspCommandConfig(**manifest["config"])
    geometry = geometry_from_dict(manifest["geometry"])
    task = DemoTask(manifest["task"])
    from .world import DEMO_MODES, DEMO_OBJECTS

    report = simulate_grasp(
        DEMO_MODES[task], DEMO_OBJECTS[task], config=config, geometry=geometry
    )
    recorded = trace_file.read_text().splitlines()
    replayed = trace_to_jsonl(report.trace).splitlines()
    for i, (a, b) in enumerate(zip(recorded, replayed)):
        if a != b:
            print(f"divergence at tick {i}:\n  recorded: {a}\n  replayed: {b}",
                  file=sys.stderr)
            return EXIT_DIVERGENCE
    if len(recorded) != len(replayed):
        print(f"divergence: trace lengths differ "
              f"({len(recorded)} recorded vs {len(replayed)} replayed)",
              file=sys.stderr)
        return EXIT_DIVERGENCE
    print(f"replay OK: {len(recorded)} ticks identical")
    return EXIT_OK


def _client(args) -> ServiceClient:
    host, port = _parse_socket(args.socket)
    return ServiceClient(host, port)


def cmd_grasp(args) -> int:
    try:
        GraspMode[args.mode.upper()]
    except KeyError:
        print(f"unknown mode {args.mode!r}; choose pinch, lateral or opposition",
              file=sys.stderr)
        return EXIT_VALIDATION
    client = _client(args)
    try:
        reply = client.command("start_grasp", mode=args.mode)
        if reply.get("type") != "ack":
            print(f"rejected: {reply.get('reason')}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"grasp acked at tick {reply['tick']}")
        if client.wait_for_phase("Holding", timeout=args.timeout):
            print("phase: Holding")
            return EXIT_OK
        if client.wait_for_phase("Fault", timeout=0.2):
            print("controller faulted", file=sys.stderr)
        else:
            print("timed out waiting for Holding", file=sys.stderr)
        return EXIT_VALIDATION
    finally:
        client.close()


def _simple_service_command(args, kind: str) -> int:
    client = _client(args)
    try:
        reply = client.command(kind)
        if reply.get("type") != "ack":
            print(f"rejected: {reply.get('reason')}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"{kind} acked at tick {reply['tick']}")
        return EXIT_OK
    finally:
        client.close()


def cmd_jog(args) -> int:
    client = _client(args)
    try:
        reply = client.command("jog", joint=args.joint, position_deg=args.degrees)
        if reply.get("type") != "ack":
            print(f"rejected: {reply.get('reason')}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"jog acked at tick {reply['tick']}")
        return EXIT_OK
    finally:
        client.close()


def cmd_serve(args) -> int:
    config = ServiceConfig.load(args.config)
    if args.socket:
        config.host, config.port = _parse_socket(args.socket)
    if args.bus:
        config.bus = args.bus
    geometry = load_geometry(args.geometry) if args.geometry else None
    service = ControlService(config, geometry=geometry)
    service.start()
    print(f"control service on {config.host}:{service.bound_port} "
          f"(bus={config.bus}, tick={config.tick_hz:.0f} Hz)", flush=True)
    try:
        service.serve_forever()
    finally:
        service.stop()
    return EXIT_OK


def cmd_export_frame(args) -> int:
    optics = default_optics_map()
    if args.shape == "sphere":
        indenter = SphereIndenter(args.size)
    else:
        indenter = HexIndenter(args.size)
    s, u = (float(v) for v in args.center.split(","))
    try:
        frame = render_contact(indenter, SurfaceCoord(s, u), args.depth, optics)
    except ValueError as e:
        print(f"invalid contact: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out)
    write_pgm(frame, out, optics.skin.gel_thickness)
    print(f"wrote {out}")
    if args.png:
        from .reports import render_tactile_heatmap

        png = out.with_suffix(".png")
        render_tactile_heatmap(frame, optics.skin.gel_thickness, png)
        print(f"wrote {png}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svelte-hand",
        description="Control and simulation stack for the 3-finger tactile hand",
    )
    parser.add_argument(
        "--config",
        default=os.environ.get("SVELTE_HAND_CONFIG"),
        help="service config file (default: $SVELTE_HAND_CONFIG)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit hand lengths to three openings")
    p.add_argument("pinch", type=float)
    p.add_argument("lateral", type=float)
    p.add_argument("opposition", type=float)
    p.add_argument("--out", default="geometry.calibrated.json")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("demo", help="run a holding demo and write its report")
    p.add_argument("task", help=", ".join(t.value for t in DemoTask))
    p.add_argument("--out", help="report directory")
    p.add_argument("--geometry", help="geometry JSON (default: packaged calibration)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("replay", help="re-simulate a demo report and diff traces")
    p.add_argument("trace", help="trace.jsonl or its report directory")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("grasp", help="command a grasp on a running service")
    p.add_argument("mode", help="pinch, lateral or opposition")
    p.add_argument("--socket", default="127.0.0.1:7460")
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_grasp)

    p = sub.add_parser("twist", help="twist command (pinch hold only)")
    p.add_argument("--socket", default="127.0.0.1:7460")
    p.set_defaults(func=lambda a: _simple_service_command(a, "twist"))

    p = sub.add_parser("release", help="release the current grasp")
    p.add_argument("--socket", default="127.0.0.1:7460")
    p.set_defaults(func=lambda a: _simple_service_command(a, "release"))

    p = sub.add_parser("jog", help="jog one joint while idle")
    p.add_argument("joint", choices=["f1", "flipper"])
    p.add_argument("degrees", type=float)
    p.add_argument("--socket", default="127.0.0.1:7460")
    p.set_defaults(func=cmd_jog)

    p = sub.add_parser("serve", help="run the control service")
    p.add_argument("--socket", help="host:port (default from config)")
    p.add_argument("--bus", choices=["emulator", "serial"])
    p.add_argument("--geometry", help="geometry JSON")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-frame", help="render a synthetic tactile frame")
    p.add_argument("--shape", choices=["sphere", "hex"], default="sphere")
    p.add_argument("--size", type=float, default=6.0,
                   help="sphere radius or hex across-flats, mm")
    p.add_argument("--depth", type=float, default=1.0)
    p.add_argument("--center", default="42.5,0", help="s,u in mm")
    p.add_argument("--out", default="frame.pgm")
    p.add_argument("--png", action="store_true")
    p.set_defaults(func=cmd_export_frame)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
