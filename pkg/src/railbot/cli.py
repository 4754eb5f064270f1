"""Command-line front door: layout checks, route planning, headless
simulation runs, the console service, and thin HTTP clients for driving
a running service."""

from __future__ import annotations

import argparse
import json
import sys
import urllib.error
import urllib.request

from . import anatloc
from .layout import generalized_layout, parse_layout, validate_layout
from .motion import default_calibration, load_calibration, traversal_time
from .routing import (
    ConnectorOverlay,
    NoRouteError,
    plan_turntable_rotations,
    shortest_path,
)
from .simcore import Simulator


def _load_layout(path: str | None):
    if path is None:
        return generalized_layout()
    with open(path) as fh:
        return parse_layout(fh.read())


def _load_profile(path: str | None):
    if path is None:
        return default_calibration()
    return load_calibration(path)


# ---------------------------------------------------------------------------
# local commands

def cmd_validate(args) -> int:
    layout = _load_layout(args.layout)
    report = validate_layout(layout)
    if report.ok:
        print(f"layout OK: {len(layout.vertices)} vertices, "
              f"{len(layout.segments)} segments, "
              f"{len(layout.turntables)} turntables, "
              f"{len(layout.connectors)} connectors")
        return 0
    for violation in report.violations:
        print(f"{violation.rule}: {violation.detail}")
    return 1


def cmd_route(args) -> int:
    layout = _load_layout(args.layout)
    profile, _power = _load_profile(args.calibration)
    overlay = ConnectorOverlay.from_layout(layout)
    for connector in args.detach or []:
        overlay = ConnectorOverlay(overlay.detached | {connector})
    try:
        src = layout.vertex_by_label(args.src).id
        dst = layout.vertex_by_label(args.dst).id
    except KeyError as exc:
        print(f"unknown vertex: {exc.args[0]}", file=sys.stderr)
        return 1
    try:
        path = shortest_path(layout, overlay, src, dst)
    except NoRouteError as exc:
        print(f"no route: {exc}", file=sys.stderr)
        return 1
    labels = " -> ".join(layout.vertices[v].label for v in path.vertices)
    print(labels)
    print(f"total: {path.total_length_mm:.0f} mm over {path.hops} hops")
    for tt_id, degrees, seconds in plan_turntable_rotations(layout, path):
        print(f"turntable {tt_id}: rotate {degrees:.0f} deg ({seconds:.3f} s)")
    est = traversal_time(layout, path, profile)
    print(f"estimated: {est:.2f} s")
    return 0


def cmd_sim(args) -> int:
    layout = _load_layout(args.layout)
    if args.duration <= 0:
        print("duration must be positive", file=sys.stderr)
        return 2
    sim = Simulator(layout, seed=args.seed)
    try:
        start = layout.vertex_by_label(args.start).id
    except KeyError:
        print(f"unknown vertex: {args.start}", file=sys.stderr)
        return 1
    sim.place_at_vertex(start)
    sim.drain_events()
    if args.imu_hz:
        sim.set_imu_stream(args.imu_hz, True)
    lines = []
    if args.goto:
        from .controller import Controller, SimLink
        controller = Controller(layout, SimLink(sim))
        controller.position = start
        try:
            controller.goto(args.goto)
        except KeyError:
            print(f"unknown vertex: {args.goto}", file=sys.stderr)
            return 1
        except NoRouteError as exc:
            print(f"no route: {exc}", file=sys.stderr)
            return 1
        end = sim.time_s + args.duration
        while controller.busy and sim.time_s < end:
            lines.extend(e.to_line() for e in controller.tick(0.05))
        if end - sim.time_s > 1e-9:
            lines.extend(e.to_line() for e in sim.step(end - sim.time_s))
    else:
        lines.extend(e.to_line() for e in sim.step(args.duration))
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for line in lines:
            print(line, file=out)
    finally:
        if args.out:
            out.close()
    return 0


def cmd_serve(args) -> int:
    from .server import ConsoleService, PortInUseError, serve

    layout = _load_layout(args.layout)
    profile, _power = _load_profile(args.calibration)
    service = ConsoleService(layout, profile, seed=args.seed,
                             time_scale=args.time_scale)
    if args.start:
        try:
            service.controller.set_position(args.start)
        except KeyError:
            print(f"unknown vertex: {args.start}", file=sys.stderr)
            return 1
    try:
        httpd = serve(args.port, service, host=args.host)
    except PortInUseError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    host, port = httpd.server_address[:2]
    print(f"console API on http://{host}:{port}", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.shutdown()
        httpd.server_close()
        service.stop()
    return 0


# ---------------------------------------------------------------------------
# HTTP clients for a running service

def _request(base: str, path: str, body: dict | None = None) -> tuple[int, dict]:
    if body is None:
        req = urllib.request.Request(base + path)
    else:
        req = urllib.request.Request(
            base + path, json.dumps(body).encode(),
            {"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=120) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())
    except urllib.error.URLError as exc:
        return 0, {"error": "unreachable", "detail": str(exc.reason)}


def cmd_goto(args) -> int:
    base = f"http://{args.host}:{args.port}"
    status, body = _request(base, "/goto", {"target": args.target})
    if status != 200:
        print(f"{body.get('error')}: {body.get('detail')}", file=sys.stderr)
        return 1
    plan = body["plan"]
    labels = " -> ".join(v["label"] for v in plan["vertices"])
    print(labels)
    print(f"{plan['direction'].lower()}, {plan['total_length_mm']:.0f} mm, "
          f"about {plan['expected_s']:.2f} s")
    return 0


def cmd_scenario_run(args) -> int:
    if args.params is None:
        params: dict = {}
    elif args.params.lstrip().startswith("{"):
        params = json.loads(args.params)
    else:
        with open(args.params) as fh:
            params = json.load(fh)
    base = f"http://{args.host}:{args.port}"
    status, body = _request(base, "/scenario",
                            {"name": args.name, "params": params})
    if status != 200:
        print(f"{body.get('error')}: {body.get('detail')}", file=sys.stderr)
        return 1
    for record in body["log"]:
        print(json.dumps(record, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# localization data

def cmd_anatloc_fit(args) -> int:
    dataset = anatloc.read_csv(args.data)
    model, classifier = anatloc.fit(dataset)
    rows = sum(len(r) for r in dataset.values())
    print(f"{len(dataset)} trials, {rows} rows")
    variance = ", ".join(f"{v:.4f}" for v in model.explained_variance)
    print(f"explained variance: {variance}")
    for label in sorted(classifier.centroids):
        x, y = classifier.centroids[label]
        print(f"{label}: ({x:+.4f}, {y:+.4f})")
    return 0


def cmd_anatloc_eval(args) -> int:
    dataset = anatloc.read_csv(args.data)
    if args.holdout not in dataset:
        print(f"no trial {args.holdout} in {args.data}", file=sys.stderr)
        return 1
    accuracy, confusion = anatloc.evaluate_holdout(dataset, args.holdout)
    print(f"holdout trial {args.holdout}: accuracy {accuracy:.4f}")
    wrong = {k: n for k, n in sorted(confusion.items()) if k[0] != k[1] and n}
    for (truth, predicted), n in wrong.items():
        print(f"  {truth} -> {predicted}: {n}")
    return 0 if accuracy >= args.min_accuracy else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railbot",
        description="track-riding wearable robot: sim, routing, console")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a layout file")
    p.add_argument("--layout", help="layout file (default: built-in)")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("route", help="plan between two landmarks")
    p.add_argument("--layout")
    p.add_argument("--calibration", help="speed/power table file")
    p.add_argument("--from", dest="src", required=True, metavar="LABEL")
    p.add_argument("--to", dest="dst", required=True, metavar="LABEL")
    p.add_argument("--detach", type=int, action="append", metavar="CONNECTOR",
                   help="treat this connector as open (repeatable)")
    p.set_defaults(fn=cmd_route)

    p = sub.add_parser("sim", help="run the simulator and dump its event log")
    p.add_argument("--layout")
    p.add_argument("--duration", type=float, default=5.0, metavar="S")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="left_wrist", metavar="LABEL")
    p.add_argument("--goto", metavar="LABEL", help="ride to this landmark")
    p.add_argument("--imu-hz", type=int, default=10,
                   help="IMU stream rate (0 = off)")
    p.add_argument("--out", help="write JSON lines here instead of stdout")
    p.set_defaults(fn=cmd_sim)

    p = sub.add_parser("serve", help="run the HTTP console service")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--layout")
    p.add_argument("--calibration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", metavar="LABEL",
                   help="operator-entered starting position")
    p.add_argument("--time-scale", type=float, default=1.0,
                   help="sim seconds per wall second")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("goto", help="send a goto to a running service")
    p.add_argument("target", metavar="LABEL")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(fn=cmd_goto)

    p = sub.add_parser("scenario", help="scenario commands")
    scen = p.add_subparsers(dest="scenario_command", required=True)
    p = scen.add_parser("run", help="run a scenario on a running service")
    p.add_argument("name")
    p.add_argument("--params", metavar="FILE_OR_JSON",
                   help="params as a JSON file path or inline JSON")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(fn=cmd_scenario_run)

    p = sub.add_parser("anatloc", help="localization data commands")
    ana = p.add_subparsers(dest="anatloc_command", required=True)
    q = ana.add_parser("fit", help="fit the locator on a sweep CSV")
    q.add_argument("--data", required=True, metavar="CSV")
    q.set_defaults(fn=cmd_anatloc_fit)
    q = ana.add_parser("eval", help="leave-one-trial-out accuracy")
    q.add_argument("--data", required=True, metavar="CSV")
    q.add_argument("--holdout", type=int, required=True, metavar="TRIAL")
    q.add_argument("--min-accuracy", type=float, default=0.0)
    q.set_defaults(fn=cmd_anatloc_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
