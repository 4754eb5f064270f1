"""Controller-side brain: routes on the track graph, turns plans into
protocol frames, tracks the robot's position as events come back, and
hands the robot off between controllers over a peer bridge.

The controller never reaches into simulator internals; everything rides
the same wire frames and event stream a physical robot would produce.
Frames are sequenced one at a time: a motion frame is only sent once the
previous one has finished, so there is never more than one motion
command in flight.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

from . import protocol
from .layout import TrackLayout, TrackSegment
from .motion import (MotionProfile, default_calibration, segment_time,
                     traversal_time)
from .routing import (
    ConnectorOverlay,
    Direction,
    NoRouteError,
    Path,
    plan_turntable_rotations,
    resolve_direction,
    set_connector,
    shortest_path,
)
from .simcore import ImuSample, RobotBusyError, SimEvent, Simulator

SEND_RETRIES = 3


class LinkDownError(Exception):
    """A command frame was lost on every attempt."""


class CommandRejectedError(Exception):
    """The robot acked a frame with a failure status."""


class UnknownPositionError(Exception):
    """Operation needs a position estimate, but none has been entered."""


class RobotAbsentError(Exception):
    """This controller does not own the robot (it was transferred away)."""


class BridgeDetachedError(Exception):
    """Peer transfer attempted while the peer bridge is detached."""


class PeerUnreachableError(Exception):
    """Peer transfer attempted without a live peer controller."""


class SimLink:
    """Wire-level link to a simulated robot.  Commands are encoded to
    frames and decoded again on the far side, so the codec sits on the
    hot path exactly as it would for a radio.  Optional frame loss and
    latency are deterministic in the seed.
    """

    def __init__(self, sim: Simulator, loss_rate: float = 0.0,
                 latency_s: float = 0.0, seed: int = 0):
        if not 0.0 <= loss_rate < 1.0:
            raise ValueError(f"loss rate must be in [0, 1), got {loss_rate}")
        self.sim = sim
        self.loss_rate = loss_rate
        self.latency_s = latency_s
        self.seed = seed
        self._sent = 0
        self._delayed: deque[tuple[float, protocol.Message]] = deque()

    def send(self, msg: protocol.Message) -> int | None:
        """One delivery attempt.  Returns the ack status, or None when
        the frame was lost."""
        self._sent += 1
        if self.loss_rate > 0.0:
            rng = random.Random(f"{self.seed}:link:{self._sent}".encode())
            if rng.random() < self.loss_rate:
                return None
        decoded = protocol.decode_frame(protocol.encode_frame(msg))
        if self.latency_s > 0.0:
            self._delayed.append((self.sim.time_s + self.latency_s, decoded))
            return 0
        return self.sim.execute(decoded)

    def poll(self, dt_s: float) -> list[SimEvent]:
        """Advance the robot by dt, applying any latency-delayed frames
        when their time comes."""
        events: list[SimEvent] = []
        remaining = dt_s
        while remaining > 1e-12:
            step = remaining
            if self._delayed:
                due = self._delayed[0][0]
                step = min(step, max(due - self.sim.time_s, 0.0))
            if step > 1e-12:
                events.extend(self.sim.step(step))
                remaining -= step
            while self._delayed and self._delayed[0][0] <= self.sim.time_s + 1e-9:
                _due, msg = self._delayed.popleft()
                self.sim.execute(msg)
        return events

    def drain_imu(self) -> list[ImuSample]:
        return self.sim.drain_imu()

    @property
    def busy(self) -> bool:
        return self.sim.busy or bool(self._delayed)

    def snapshot(self) -> dict:
        return self.sim.snapshot()


@dataclass(frozen=True)
class GotoPlan:
    """What a goto will do: the route, the frames that will be sent, the
    spin plan for each turntable on the way, and the expected duration."""

    path: Path
    frames: tuple[protocol.Message, ...]
    rotations: tuple[tuple[int, float, float], ...]
    direction: Direction
    expected_s: float


@dataclass
class _Pending:
    frame: protocol.Message
    done: Callable[[SimEvent], bool]


def _frame_done(frame: protocol.Message) -> Callable[[SimEvent], bool]:
    if isinstance(frame, protocol.MoveTo):
        return lambda e: e.kind == "Arrived" and e.data.get("vertex") == frame.vertex
    if isinstance(frame, protocol.RotateTurntable):
        return lambda e: e.kind == "TurntableStop"
    return lambda e: True  # fire-and-forget frames clear immediately


def _trimmed_segment(seg: TrackSegment, lo: float, hi: float) -> TrackSegment:
    """The piece of `seg` between arc positions lo and hi, as a segment of
    its own, so the exact time integral applies to partial runs too."""
    interior = [(s - lo, a) for s, a in seg.incline_profile if lo < s < hi]
    profile = ((0.0, seg.angle_at(lo)), *interior, (hi - lo, seg.angle_at(hi)))
    return replace(seg, length_mm=hi - lo, incline_profile=profile)


class Controller:
    """Holds the graph, a position estimate, and the command queue for
    one robot.  All mutation happens through explicit calls; `tick`
    pumps the link and keeps the estimate current.
    """

    def __init__(self, layout: TrackLayout, link: SimLink,
                 profile: MotionProfile | None = None):
        self.layout = layout
        self.link = link
        self.overlay = ConnectorOverlay.from_layout(layout)
        self.profile = profile if profile is not None else default_calibration()[0]
        self.position: int | None = None
        self.previous_vertex: int | None = None
        self.owns_robot = True
        self.scenario: str | None = None
        self.plan: GotoPlan | None = None
        self.events: list[SimEvent] = []
        self._queue: deque[_Pending] = deque()
        self._waiting: _Pending | None = None

    # position -----------------------------------------------------------

    def vertex_id(self, ref: int | str) -> int:
        if isinstance(ref, int):
            if ref not in self.layout.vertices:
                raise KeyError(f"no vertex {ref}")
            return ref
        return self.layout.vertex_by_label(ref).id

    def set_position(self, ref: int | str) -> None:
        """Operator-entered starting position; also seats the robot there."""
        vertex = self.vertex_id(ref)
        self.link.sim.place_at_vertex(vertex)
        self.link.sim.drain_events()
        self.position = vertex
        self.previous_vertex = None

    @property
    def busy(self) -> bool:
        return bool(self._queue) or self._waiting is not None or self.link.busy

    # command pipeline ---------------------------------------------------

    def send_frame(self, frame: protocol.Message) -> None:
        """Low-level escape hatch: deliver one frame immediately, outside
        the goto queue.  Scenario code uses it for fine positioning (a
        MoveTo it will cut short with a Stop); refused while a queued
        plan is still running so the two paths cannot interleave.
        """
        if self._queue or self._waiting is not None:
            raise RobotBusyError("a planned route is still in flight")
        self._send(frame)

    def _send(self, frame: protocol.Message) -> None:
        for _attempt in range(1 + SEND_RETRIES):
            status = self.link.send(frame)
            if status is None:
                continue
            if status == 0:
                return
            if status == 1:
                raise RobotBusyError(f"robot refused {type(frame).__name__}")
            raise CommandRejectedError(
                f"{type(frame).__name__} rejected with status {status}")
        raise LinkDownError(
            f"{type(frame).__name__} lost {1 + SEND_RETRIES} times")

    def _pump_queue(self) -> None:
        while self._waiting is None and self._queue:
            pending = self._queue.popleft()
            self._send(pending.frame)
            if not isinstance(pending.frame,
                              (protocol.MoveTo, protocol.RotateTurntable)):
                continue  # nothing to wait for
            self._waiting = pending

    def tick(self, dt_s: float = 0.05) -> list[SimEvent]:
        """Advance the robot, fold its events into the position estimate,
        and send the next queued frame when the current one finishes."""
        events = self.link.poll(dt_s)
        for event in events:
            if event.kind == "Arrived":
                vertex = event.data["vertex"]
                if vertex != self.position:
                    self.previous_vertex = self.position
                    self.position = vertex
            if self._waiting is not None and self._waiting.done(event):
                self._waiting = None
        self.events.extend(events)
        self._pump_queue()
        if not self.busy:
            self.plan = None
        return events

    def wait_idle(self, timeout_s: float = 120.0, dt_s: float = 0.05) -> list[SimEvent]:
        events: list[SimEvent] = []
        deadline = self.link.sim.time_s + timeout_s
        while self.busy:
            if self.link.sim.time_s >= deadline:
                raise TimeoutError(f"robot still busy after {timeout_s} s")
            events.extend(self.tick(dt_s))
        return events

    # navigation ---------------------------------------------------------

    def route(self, target: int | str, source: int | str | None = None) -> Path:
        src = self.position if source is None else self.vertex_id(source)
        if src is None:
            raise UnknownPositionError("enter the robot's position first")
        return shortest_path(self.layout, self.overlay, src, self.vertex_id(target))

    def _segment_lead(self, target_id: int):
        """When the robot sits partway along a segment (a scenario parked
        it there), pick the endpoint to resume through: whichever makes
        the lead hop plus the onward route fastest.

        Returns (lead vertex, far vertex, lead seconds, onward path), or
        None when the robot is at a vertex and no lead hop is needed.
        """
        locus = self.link.snapshot()["locus"]
        if locus["kind"] != "segment":
            return None
        seg = self.layout.segments[locus["segment"]]
        s = locus["s_mm"]
        a, b = seg.endpoints
        best = None
        for lead, lo, hi, heading_ab in ((a, 0.0, s, False), (b, s, seg.length_mm, True)):
            run = hi - lo
            try:
                onward = shortest_path(self.layout, self.overlay, lead, target_id)
            except NoRouteError:
                continue
            lead_s = 0.0 if run < 1e-9 else segment_time(
                _trimmed_segment(seg, lo, hi), heading_ab, self.profile)
            cost = lead_s + traversal_time(self.layout, onward, self.profile)
            if best is None or cost < best[0]:
                best = (cost, lead, seg.other_end(lead), lead_s, onward)
        if best is None:
            raise NoRouteError(a, target_id)
        return best[1:]

    def goto(self, target: int | str) -> GotoPlan:
        """Plan and start riding the shortest path to `target`.

        Raises RobotBusyError while a previous goto is still running, and
        NoRouteError when detached connectors cut the target off.  A robot
        parked partway along a segment first rides out to whichever end
        gives the faster total trip.
        """
        if not self.owns_robot:
            raise RobotAbsentError("robot was transferred to a peer")
        if self.busy:
            raise RobotBusyError("a motion command is already in flight")
        target_id = self.vertex_id(target)
        if self.position is None:
            raise UnknownPositionError("enter the robot's position first")
        lead = self._segment_lead(target_id)
        if lead is None:
            path = self.route(target_id)
            previous = self.previous_vertex
            lead_frames: list[protocol.Message] = []
            lead_s = 0.0
        else:
            lead_vertex, far_vertex, lead_s, path = lead
            # the robot sits between the two ends, so path-wise it comes
            # from the far one
            previous = far_vertex
            lead_frames = [protocol.MoveTo(vertex=lead_vertex, speed_code=0)]
        direction = resolve_direction(path, previous)
        rotations = tuple(plan_turntable_rotations(self.layout, path))
        frames: list[protocol.Message] = lead_frames
        vs = path.vertices
        i = 1
        while i < len(vs):
            if path.segments[i - 1] is None:
                tt = self.layout.turntable_of_port(vs[i - 1])
                port = tt.port_vertices.index(vs[i])
                frames.append(protocol.RotateTurntable(port=port))
                if i < len(vs) - 1 and path.segments[i] is None:
                    i += 1  # stay docked through a chained rotor hop
                    continue
            frames.append(protocol.MoveTo(vertex=vs[i], speed_code=0))
            i += 1
        plan = GotoPlan(
            path=path,
            frames=tuple(frames),
            rotations=rotations,
            direction=direction,
            expected_s=lead_s + traversal_time(self.layout, path, self.profile),
        )
        for frame in plan.frames:
            self._queue.append(_Pending(frame, _frame_done(frame)))
        self.plan = plan
        self._pump_queue()
        return plan

    # auxiliary commands -------------------------------------------------

    def vibrate(self, kind: str, amplitude_mm: float, period_s: float,
                duration_s: float) -> None:
        kinds = {name: code for code, name in protocol.VIBRATE_KINDS.items()}
        if kind not in kinds:
            raise ValueError(f"unknown vibration kind {kind!r}")
        self._send(protocol.Vibrate(
            kind=kinds[kind],
            amp_mm_x10=round(amplitude_mm * 10),
            period_ms=round(period_s * 1000),
            duration_ms=round(duration_s * 1000),
        ))

    def stream_imu(self, rate_hz: int, on: bool) -> None:
        self._send(protocol.StreamImu(rate_hz=rate_hz, on=int(on)))

    def set_connector(self, connector_id: int, state: str) -> None:
        self.overlay = set_connector(self.layout, self.overlay,
                                     connector_id, state)
        self.link.sim.set_connector_state(connector_id, state)

    def state(self) -> dict:
        snap = self.link.snapshot()
        snap["owns_robot"] = self.owns_robot
        snap["scenario"] = self.scenario
        snap["controller_position"] = self.position
        snap["controller_previous"] = self.previous_vertex
        if self.plan is not None:
            snap["plan"] = {
                "vertices": list(self.plan.path.vertices),
                "expected_s": round(self.plan.expected_s, 3),
            }
        else:
            snap["plan"] = None
        return snap


# ---------------------------------------------------------------------------
# peer transfer

def _bridge_connector(controller: Controller):
    for connector in controller.layout.connectors.values():
        if connector.kind == "peer_bridge":
            return connector
    raise BridgeDetachedError("layout has no peer bridge")


def transfer_robot(origin: Controller, peer: Controller | None) -> dict:
    """Hand the robot across the peer bridge: serialize its state, mark it
    absent here, and seat it on the peer's bridge stub.  Exactly one
    controller owns the robot at every observable instant.
    """
    if peer is None or peer.link is None:
        raise PeerUnreachableError("no peer controller to adopt the robot")
    if not origin.owns_robot:
        raise RobotAbsentError("origin controller does not hold the robot")
    bridge = _bridge_connector(origin)
    if not origin.overlay.is_attached(bridge.id):
        raise BridgeDetachedError(f"connector {bridge.id} is detached")
    peer_bridge = _bridge_connector(peer)
    if not peer.overlay.is_attached(peer_bridge.id):
        raise BridgeDetachedError(f"peer connector {peer_bridge.id} is detached")
    seg = origin.layout.segments[bridge.segment]
    if origin.position not in seg.endpoints:
        raise BridgeDetachedError("robot is not at the bridge")

    sim = origin.link.sim
    state = {
        "battery_mah": sim.battery_mah,
        "payload_g": sim.payload_g,
    }
    origin.owns_robot = False
    origin.position = None
    origin.previous_vertex = None

    peer_seg = peer.layout.segments[peer_bridge.segment]
    # the far stub is the offbody end; the robot appears there and rides in
    entry = next(v for v in peer_seg.endpoints
                 if peer.layout.vertices[v].garment == "offbody")
    peer_sim = peer.link.sim
    peer_sim.place_at_vertex(entry)
    peer_sim.drain_events()
    peer_sim.battery_mah = state["battery_mah"]
    peer_sim.payload_g = state["payload_g"]
    peer.position = entry
    peer.previous_vertex = None
    peer.owns_robot = True
    return state
