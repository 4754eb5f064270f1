"""HTTP console service: snapshots, commands, and a live event stream
over plain stdlib HTTP.

Reads are answered from the latest published snapshot; every mutation
funnels through one serialized command loop that also paces the
simulated robot against wall time.  The event stream is newline-
delimited JSON with monotonic sequence numbers, so any number of
subscribers can follow along and detect gaps; `?since=N` resumes after
a dropped connection.
"""

from __future__ import annotations

import errno
import json
import queue
import threading
from collections import deque
from concurrent.futures import Future
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .controller import (
    Controller,
    LinkDownError,
    RobotAbsentError,
    SimLink,
    UnknownPositionError,
)
from .layout import TrackLayout, serialize_layout
from .motion import MotionProfile
from .routing import NoRouteError
from .scenarios import BadScenarioError, ScenarioScript, run_scenario
from .simcore import RobotBusyError, SimEvent, Simulator

EVENT_BUFFER = 10_000
COMMAND_TIMEOUT_S = 120.0


class PortInUseError(Exception):
    """The requested listen port is already taken."""


class _EventFeed(list):
    """controller.events stand-in that also publishes to the hub, so the
    stream stays live even while a scenario drives the controller."""

    def __init__(self, hub: "ConsoleService"):
        super().__init__()
        self._hub = hub

    def append(self, event: SimEvent) -> None:
        super().append(event)
        self._hub._publish(event)

    def extend(self, events) -> None:
        for event in events:
            self.append(event)


class ConsoleService:
    """Owns the simulator, the controller, and the command loop."""

    def __init__(self, layout: TrackLayout, profile: MotionProfile | None = None,
                 seed: int = 0, time_scale: float = 1.0, tick_s: float = 0.02):
        if time_scale <= 0:
            raise ValueError("time_scale must be positive")
        self.layout = layout
        self.sim = Simulator(layout, seed=seed)
        self.controller = Controller(layout, SimLink(self.sim), profile)
        self.time_scale = time_scale
        self.tick_s = tick_s
        self._commands: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._wakeup = threading.Condition(self._lock)
        self._events: deque[dict] = deque(maxlen=EVENT_BUFFER)
        self._seq = 0
        self._state: dict = {}
        self._running = False
        self._thread: threading.Thread | None = None
        self.controller.events = _EventFeed(self)
        self._publish_state()

    # command loop -------------------------------------------------------

    def start(self) -> None:
        if self._running:
            return
        self._running = True
        self._thread = threading.Thread(target=self._loop, daemon=True,
                                        name="console-loop")
        self._thread.start()

    def stop(self) -> None:
        self._running = False
        self._commands.put(None)
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        with self._wakeup:
            self._wakeup.notify_all()

    def _loop(self) -> None:
        while self._running:
            try:
                item = self._commands.get(timeout=self.tick_s)
            except queue.Empty:
                self.controller.tick(self.tick_s * self.time_scale)
                self._publish_state()
                continue
            if item is None:
                return
            fn, fut = item
            try:
                fut.set_result(fn())
            except BaseException as exc:  # handed to the waiting request
                fut.set_exception(exc)
            self._publish_state()

    def submit(self, fn, timeout_s: float = COMMAND_TIMEOUT_S):
        """Run `fn` on the command loop and return its result."""
        if not self._running:
            raise RuntimeError("service is not running")
        fut: Future = Future()
        self._commands.put((fn, fut))
        return fut.result(timeout=timeout_s)

    # published state ----------------------------------------------------

    def _publish_state(self) -> None:
        state = self.controller.state()
        with self._lock:
            state["seq"] = self._seq
            self._state = state

    def _publish(self, event: SimEvent) -> None:
        record = {"time": round(event.time, 6), "kind": event.kind}
        record.update(event.data)
        with self._wakeup:
            self._seq += 1
            record["seq"] = self._seq
            self._events.append(record)
            self._wakeup.notify_all()

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._state)

    def events_since(self, since: int) -> list[dict]:
        with self._lock:
            return [r for r in self._events if r["seq"] > since]

    def wait_events(self, since: int, timeout_s: float = 0.5) -> list[dict]:
        """Events after `since`, blocking briefly when none are buffered."""
        with self._wakeup:
            batch = [r for r in self._events if r["seq"] > since]
            if batch or not self._running:
                return batch
            self._wakeup.wait(timeout=timeout_s)
            return [r for r in self._events if r["seq"] > since]


def _plan_payload(service: ConsoleService, plan) -> dict:
    labels = service.layout.vertices
    return {
        "vertices": [{"id": v, "label": labels[v].label}
                     for v in plan.path.vertices],
        "segments": list(plan.path.segments),
        "rotations": [list(r) for r in plan.rotations],
        "direction": plan.direction.name,
        "total_length_mm": round(plan.path.total_length_mm, 3),
        "expected_s": round(plan.expected_s, 3),
        "frames": len(plan.frames),
    }


class ConsoleHandler(BaseHTTPRequestHandler):
    service: ConsoleService  # bound by serve()
    protocol_version = "HTTP/1.1"

    # quiet: requests are the console's business, not stderr's
    def log_message(self, fmt, *args):  # noqa: D102
        pass

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        data = json.loads(raw.decode())
        if not isinstance(data, dict):
            raise ValueError("body must be a JSON object")
        return data

    def do_GET(self) -> None:
        url = urlparse(self.path)
        if url.path == "/state":
            self._reply(200, self.service.snapshot())
        elif url.path == "/layout":
            self._reply(200, json.loads(serialize_layout(self.service.layout)))
        elif url.path == "/events":
            query = parse_qs(url.query)
            since = int(query.get("since", ["0"])[0])
            self._stream_events(since)
        else:
            self._reply(404, {"error": "not_found", "path": url.path})

    def _stream_events(self, since: int) -> None:
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-store")
        self.send_header("Connection", "close")
        self.end_headers()
        cursor = since
        try:
            while self.service._running:
                for record in self.service.wait_events(cursor):
                    line = json.dumps(record, sort_keys=True) + "\n"
                    self.wfile.write(line.encode())
                    cursor = record["seq"]
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass  # subscriber went away

    def do_POST(self) -> None:
        url = urlparse(self.path)
        try:
            body = self._body()
        except (ValueError, json.JSONDecodeError) as exc:
            self._reply(400, {"error": "bad_request", "detail": str(exc)})
            return
        try:
            handler = {
                "/goto": self._post_goto,
                "/vibrate": self._post_vibrate,
                "/connector": self._post_connector,
                "/scenario": self._post_scenario,
                "/position": self._post_position,
            }.get(url.path)
            if handler is None:
                self._reply(404, {"error": "not_found", "path": url.path})
                return
            handler(body)
        except NoRouteError as exc:
            self._reply(422, {"error": "no_route", "detail": str(exc)})
        except (KeyError, ValueError, BadScenarioError) as exc:
            self._reply(422, {"error": "rejected", "detail": str(exc)})
        except (RobotBusyError, RobotAbsentError, UnknownPositionError) as exc:
            self._reply(409, {"error": type(exc).__name__, "detail": str(exc)})
        except LinkDownError as exc:
            self._reply(502, {"error": "link_down", "detail": str(exc)})

    def _post_goto(self, body: dict) -> None:
        target = body["target"]
        plan = self.service.submit(lambda: self.service.controller.goto(target))
        self._reply(200, {"plan": _plan_payload(self.service, plan)})

    def _post_vibrate(self, body: dict) -> None:
        kind = body["kind"]
        amp = float(body.get("amp_mm", 1.0))
        period = float(body.get("period_s", 0.1))
        duration = float(body.get("duration_s", 0.5))
        self.service.submit(
            lambda: self.service.controller.vibrate(kind, amp, period, duration))
        self._reply(200, {"ok": True})

    def _post_connector(self, body: dict) -> None:
        connector = int(body["id"])
        state = body["state"]
        self.service.submit(
            lambda: self.service.controller.set_connector(connector, state))
        detached = sorted(self.service.controller.overlay.detached)
        self._reply(200, {"id": connector, "state": state,
                          "detached": detached})

    def _post_scenario(self, body: dict) -> None:
        script = ScenarioScript(body["name"], body.get("params", {}))
        log = self.service.submit(
            lambda: run_scenario(self.service.controller, script))
        records = [json.loads(e.to_line()) for e in log]
        self._reply(200, {"name": script.name, "log": records})

    def _post_position(self, body: dict) -> None:
        vertex = body["vertex"]
        self.service.submit(
            lambda: self.service.controller.set_position(vertex))
        self._reply(200, self.service.snapshot())


def serve(port: int, service: ConsoleService,
          host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bind the console API and start the command loop.  The caller owns
    the returned server: serve_forever() it (or poll handle_request) and
    shut both down when finished."""
    handler = type("BoundConsoleHandler", (ConsoleHandler,),
                   {"service": service})
    try:
        httpd = ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise PortInUseError(f"port {port} is already in use") from exc
        raise
    httpd.daemon_threads = True
    service.start()
    return httpd
