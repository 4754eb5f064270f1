"""Deterministic discrete-event simulation of the robot on its track.

Time advances on a fixed 10 ms grid regardless of the caller's step size:
`step(dt)` banks the requested time and burns whole ticks off it, so two runs
with the same seed and command script produce byte-identical event logs no
matter how the wall-clock loop slices time. Magnet crossings are solved
within a tick by linear interpolation, never sampled, so no landmark is
missed at any step size.

Randomness is counter-keyed: activity disturbance is drawn per 50 ms window
from (seed, window index) and sensor noise per sample timestamp, which keeps
every random draw independent of call order and step partitioning.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace

from .layout import TrackLayout
from . import protocol
from .kernel import body_accel, integrate_tick
from .motion import (
    SLIP_SETBACK_MM_S,
    ActivityFlags,
    MotionProfile,
    PowerModel,
    SlipState,
    current_draw,
    default_calibration,
    micro_slip_mm,
    slip_state,
    speed_at,
)

TICK_S = 0.01
_TICK_US = 10_000
ENVELOPE_WINDOW_S = 0.05
ROTOR_RATE_DPS = 900.0  # 360 deg / 0.4 s
SPEED_ERROR_BOUND = 0.05
ANCHOR_UNCERTAINTY_MM = 4.0
BATTERY_LOW_FRACTION = 0.10
DEFAULT_IMU_NOISE_G = 0.05
GYRO_NOISE_DPS = 0.5
CALIBRATION_IMU_HZ = 15
TELEMETRY_IMU_HZ = 10

# rotor platform geometry for IMU synthesis: tilted plane plus the dock step
# the wheels climb over, which is what makes the x/z jump visible
TURNTABLE_TILT_DEG = 35.0
TURNTABLE_STEP = (-0.10, 0.0, -0.35)

# g-force norm ceilings for injected user activities
ACTIVITY_PEAK_G = {
    "stand": 1.15,
    "walk": 3.0,
    "stairs": 5.0,
    "jog": 9.0,
    "jump": 12.0,
}

TAP_THRESHOLD_G = 2.5
TAP_MAX_SPIKE_S = 0.1
TAP_MIN_WINDOW_S = 0.2
TAP_BASELINE_TOL_G = 0.35


class SimHaltedError(Exception):
    """Stepping a derailed or battery-dead simulation."""


class OrientationMismatchError(Exception):
    pass


class RobotBusyError(Exception):
    pass


class CommandError(ValueError):
    """Physically impossible command for the current locus."""


@dataclass(frozen=True)
class VertexLocus:
    vertex: int


@dataclass(frozen=True)
class SegmentLocus:
    segment: int
    s_mm: float
    heading_ab: bool


@dataclass(frozen=True)
class RotorLocus:
    turntable: int
    angle_deg: float
    entry_deg: float


@dataclass(frozen=True)
class ImuSample:
    t: float
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]

    @property
    def g_norm(self) -> float:
        ax, ay, az = self.accel
        return math.sqrt(ax * ax + ay * ay + az * az)


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str
    data: dict

    def to_line(self) -> str:
        record = {"time": round(self.time, 6), "kind": self.kind}
        record.update(self.data)
        return json.dumps(record, sort_keys=True)


@dataclass(frozen=True)
class DeadReckonEstimate:
    anchor_vertex: int | None
    offset_mm: float
    uncertainty_mm: float


def dead_reckon_update(est: DeadReckonEstimate, dt_s: float, speed_mm_s: float,
                       error_bound: float = SPEED_ERROR_BOUND) -> DeadReckonEstimate:
    return DeadReckonEstimate(
        est.anchor_vertex,
        est.offset_mm + speed_mm_s * dt_s,
        est.uncertainty_mm + abs(speed_mm_s) * error_bound * dt_s,
    )


def dead_reckon_anchor(vertex: int) -> DeadReckonEstimate:
    return DeadReckonEstimate(vertex, 0.0, ANCHOR_UNCERTAINTY_MM)


@dataclass(frozen=True)
class VibrationPattern:
    kind: str
    amplitude_mm: float
    period_s: float
    duration_s: float

    def __post_init__(self):
        if self.kind not in ("square", "sawtooth", "quick"):
            raise ValueError(f"unknown vibration kind {self.kind!r}")
        if not 0 < self.amplitude_mm <= 10.0:
            raise ValueError("amplitude must be in (0, 10] mm")
        if self.period_s <= 0 or self.duration_s <= 0:
            raise ValueError("period and duration must be positive")
        if self.kind in ("square", "sawtooth") and self.duration_s < self.period_s:
            raise ValueError("duration must cover at least one period")
        if self.kind == "quick" and self.duration_s > 0.3:
            raise ValueError("quick vibration is capped at 0.3 s")


def vibration_displacement(pattern: VibrationPattern, t: float) -> float:
    """Carriage displacement in mm at time t since pattern start."""
    if t < 0 or t >= pattern.duration_s:
        return 0.0
    if pattern.kind == "square":
        phase = math.fmod(t, pattern.period_s)
        return pattern.amplitude_mm if phase < pattern.period_s / 2 else -pattern.amplitude_mm
    if pattern.kind == "sawtooth":
        frac = math.fmod(t, pattern.period_s) / pattern.period_s
        return pattern.amplitude_mm * frac
    half = pattern.duration_s / 2
    if t < half:
        return pattern.amplitude_mm * t / half
    return pattern.amplitude_mm * (pattern.duration_s - t) / half


def vibration_trajectory(pattern: VibrationPattern, rate_hz: float = 200.0) -> list[tuple[float, float]]:
    n = max(2, int(round(pattern.duration_s * rate_hz)))
    times = [i * pattern.duration_s / n for i in range(n)]
    out = [(t, vibration_displacement(pattern, t)) for t in times]
    out.append((pattern.duration_s, 0.0))
    return out


def _vibration_tick_times(pattern: VibrationPattern) -> list[float]:
    if pattern.kind == "quick":
        return [pattern.duration_s / 2, pattern.duration_s]
    step = pattern.period_s / 2 if pattern.kind == "square" else pattern.period_s
    n = int(pattern.duration_s / step + 1e-9)
    return [min(k * step, pattern.duration_s) for k in range(1, n + 1)]


def detect_tap(samples: list[ImuSample]) -> bool:
    """A tap is a brief spike over a quiet baseline.

    Quiet means the median norm sits near 1 g, which is where any resting
    orientation lands; sustained shaking lifts the whole window away from
    that. The spike itself must clear the threshold for less than the
    budget, so slow loading is not a tap either.
    """
    if len(samples) < 2 or samples[-1].t - samples[0].t < TAP_MIN_WINDOW_S:
        return False
    norms = sorted(s.g_norm for s in samples)
    baseline = norms[len(norms) // 2]
    if abs(baseline - 1.0) >= TAP_BASELINE_TOL_G:
        return False
    dt = (samples[-1].t - samples[0].t) / (len(samples) - 1)
    above = sum(1 for s in samples if s.g_norm > baseline + TAP_THRESHOLD_G)
    return 0 < above * dt < TAP_MAX_SPIKE_S


def _wrap180(deg: float) -> float:
    return (deg + 180.0) % 360.0 - 180.0


class Simulator:
    """Single-writer plant model. All mutation happens in command methods and
    step(); readers get value snapshots.
    """

    def __init__(self, layout: TrackLayout, profile: MotionProfile | None = None,
                 power: PowerModel | None = None, seed: int = 0,
                 payload_g: float = 0.0, imu_noise_g: float = DEFAULT_IMU_NOISE_G,
                 cloth_sway_mm: float = 0.0, ble_connected: bool = True):
        if profile is None or power is None:
            default_profile, default_power = default_calibration()
            profile = profile or default_profile
            power = power or default_power
        self.layout = layout
        self.profile = profile
        self.power = power
        self.seed = seed
        self.payload_g = payload_g
        self.imu_noise_g = imu_noise_g
        self.cloth_sway_mm = cloth_sway_mm
        self.ble_connected = ble_connected

        self._tick = 0
        self._credit_us = 0
        self.detached_connectors: set[int] = {
            c.id for c in layout.connectors.values() if c.state == "detached"}
        self.locus: VertexLocus | SegmentLocus | RotorLocus | None = None
        self.previous_vertex: int | None = None
        self.last_vertex: int | None = None
        self.commanded_speed: float | None = None
        self.battery_mah = power.battery_capacity_mah
        self.slip = SlipState.GRIP
        self.derailed = False
        self.dead_reckon = DeadReckonEstimate(None, 0.0, math.inf)

        self._move_target: int | None = None
        self._rotor_target: float | None = None
        self._rotor_sign = 0.0
        self._vibration: tuple[VibrationPattern, float] | None = None
        self._vib_ticks_left: list[float] = []
        self._imu_on = False
        self._imu_rate = TELEMETRY_IMU_HZ
        self._imu_seq = 0
        self._imu_queue: list[ImuSample] = []
        self._activities: list[tuple[float, float, str, float]] = []
        self._spikes: list[tuple[float, float, float]] = []
        self._user_rotation: list[tuple[float, float, tuple[float, float, float]]] = []
        self._halted = False
        self._battery_low_fired = False
        self._micro_window = -1
        self._events: list[SimEvent] = []

    # ------------------------------------------------------------------
    # time

    @property
    def time_s(self) -> float:
        return self._tick * TICK_S

    @property
    def busy(self) -> bool:
        return (self._move_target is not None or self._rotor_target is not None
                or self._vibration is not None)

    # ------------------------------------------------------------------
    # placement and commands

    def place_at_vertex(self, vertex_id: int) -> None:
        if vertex_id not in self.layout.vertices:
            raise KeyError(vertex_id)
        self.locus = VertexLocus(vertex_id)
        self.last_vertex = vertex_id
        self.previous_vertex = None
        self.dead_reckon = dead_reckon_anchor(vertex_id)

    def move_to(self, vertex_id: int, speed_mm_s: float | None = None) -> None:
        """Advance to an adjacent vertex (one hop). From a rotor, the exit
        port must already face the right way.
        """
        if self.derailed:
            raise SimHaltedError("derailed")
        if vertex_id not in self.layout.vertices:
            raise CommandError(f"unknown vertex {vertex_id}")
        if speed_mm_s is not None:
            self.commanded_speed = speed_mm_s
        if isinstance(self.locus, RotorLocus):
            self._exit_onto(vertex_id)
            return
        if isinstance(self.locus, VertexLocus):
            here = self.locus.vertex
            if vertex_id == here:
                self._emit("Arrived", {"vertex": vertex_id})
                return
            seg = self._segment_between(here, vertex_id)
            if seg is None:
                raise CommandError(
                    f"no attached segment joins vertex {here} and {vertex_id}")
            heading_ab = seg.endpoints[0] == here
            self.locus = SegmentLocus(seg.id, 0.0 if heading_ab else seg.length_mm, heading_ab)
            self._move_target = vertex_id
            return
        if isinstance(self.locus, SegmentLocus):
            seg = self.layout.segments[self.locus.segment]
            if vertex_id not in seg.endpoints:
                raise CommandError(
                    f"vertex {vertex_id} is not an end of the current segment")
            self.locus = replace(self.locus, heading_ab=seg.endpoints[1] == vertex_id)
            self._move_target = vertex_id
            return
        raise CommandError("robot has no position yet; place it first")

    def stop(self) -> None:
        self._move_target = None

    def set_speed(self, mm_s: float | None) -> None:
        self.commanded_speed = mm_s if mm_s else None

    def dock_turntable(self, turntable_id: int) -> None:
        tt = self.layout.turntables.get(turntable_id)
        if tt is None:
            raise CommandError(f"unknown turntable {turntable_id}")
        if not isinstance(self.locus, VertexLocus) or tt.port_angle(self.locus.vertex) is None:
            raise CommandError("robot is not parked at a port of that turntable")
        angle = tt.port_angle(self.locus.vertex)
        self.locus = RotorLocus(turntable_id, angle, angle)

    def rotate_turntable(self, port_index: int) -> float:
        """Spin the rotor to the given port (by index). Auto-docks when the
        robot is parked at a port vertex. Returns the planned degrees.
        """
        if not isinstance(self.locus, RotorLocus):
            if isinstance(self.locus, VertexLocus):
                tt = self.layout.turntable_of_port(self.locus.vertex)
                if tt is None:
                    raise CommandError("robot is not at a turntable port")
                self.dock_turntable(tt.id)
            else:
                raise CommandError("cannot rotate while travelling a segment")
        assert isinstance(self.locus, RotorLocus)
        tt = self.layout.turntables[self.locus.turntable]
        if not 0 <= port_index < len(tt.ports):
            raise CommandError(f"turntable {tt.id} has no port {port_index}")
        target = tt.ports[port_index][1]
        delta = _wrap180(target - self.locus.angle_deg)
        if abs(delta) < 1e-9:
            return 0.0
        self._rotor_target = target
        self._rotor_sign = 1.0 if delta > 0 else -1.0
        self._emit("TurntableStart", {"turntable": tt.id, "target_deg": target})
        return abs(delta)

    def rotate_by(self, degrees: float) -> None:
        """Raw relative spin (sign picks the direction); used for timing
        checks and manual nudging. 360 is honored, not normalized away.
        """
        if not isinstance(self.locus, RotorLocus):
            raise CommandError("not docked")
        if degrees == 0:
            return
        self._rotor_target = self.locus.angle_deg + degrees
        self._rotor_sign = 1.0 if degrees > 0 else -1.0
        self._emit("TurntableStart", {"turntable": self.locus.turntable,
                                      "target_deg": self._rotor_target % 360.0})

    def _facing_port(self) -> int | None:
        assert isinstance(self.locus, RotorLocus)
        tt = self.layout.turntables[self.locus.turntable]
        for vid, angle in tt.ports:
            if abs(_wrap180(angle - self.locus.angle_deg)) < 1e-6:
                return vid
        return None

    def exit_turntable(self, vertex_id: int | None = None) -> int:
        """Leave the rotor through the port at the current angle."""
        if not isinstance(self.locus, RotorLocus):
            raise CommandError("not docked")
        if self._rotor_target is not None:
            raise RobotBusyError("rotor still rotating")
        port_vertex = self._facing_port()
        if port_vertex is None:
            tt = self.layout.turntables[self.locus.turntable]
            raise OrientationMismatchError(
                f"rotor at {self.locus.angle_deg:g} deg matches no port of turntable {tt.id}")
        if vertex_id is not None and vertex_id != port_vertex:
            raise OrientationMismatchError(
                f"rotor faces vertex {port_vertex}, not {vertex_id}")
        self.locus = VertexLocus(port_vertex)
        self._register_vertex(port_vertex, self.time_s)
        return port_vertex

    def _exit_onto(self, target: int) -> None:
        # validate the whole hop first so a refused move leaves us docked
        if self._rotor_target is not None:
            raise RobotBusyError("rotor still rotating")
        port_vertex = self._facing_port()
        if port_vertex is None:
            raise OrientationMismatchError(
                f"rotor is between ports; rotate to a port before moving")
        if target != port_vertex and self._segment_between(port_vertex, target) is None:
            raise OrientationMismatchError(
                f"rotor faces vertex {port_vertex}, which has no track to {target}")
        self.exit_turntable()
        if target == port_vertex:
            self._emit("Arrived", {"vertex": target})
            return
        self.move_to(target)

    def play_vibration(self, pattern: VibrationPattern) -> list[tuple[float, float]]:
        if self.derailed or self.slip is not SlipState.GRIP:
            raise CommandError("robot is not gripping the track")
        if self._move_target is not None or self._rotor_target is not None:
            raise RobotBusyError("motion command in progress")
        self._vibration = (pattern, self.time_s)
        self._vib_ticks_left = [self.time_s + t for t in _vibration_tick_times(pattern)]
        return vibration_trajectory(pattern)

    def set_imu_stream(self, rate_hz: int, on: bool) -> None:
        if rate_hz > protocol.MAX_IMU_RATE_HZ:
            raise protocol.RateExceededError(f"{rate_hz} Hz")
        if on and rate_hz > 0:
            self._imu_rate = rate_hz
        self._imu_on = on and rate_hz > 0

    def inject_activity(self, kind: str, duration_s: float,
                        start_s: float | None = None) -> None:
        peak = ACTIVITY_PEAK_G[kind]
        start = self.time_s if start_s is None else start_s
        self._activities.append((start, duration_s, kind, peak))

    def inject_spike(self, peak_g: float, duration_s: float,
                     start_s: float | None = None) -> None:
        """Worst-case disturbance: aligned with gravity so the g-force norm
        reaches peak_g exactly."""
        start = self.time_s if start_s is None else start_s
        self._spikes.append((start, duration_s, peak_g))

    def inject_user_rotation(self, rate_dps: tuple[float, float, float],
                             duration_s: float, start_s: float | None = None) -> None:
        start = self.time_s if start_s is None else start_s
        self._user_rotation.append((start, duration_s, rate_dps))

    # protocol bridge -------------------------------------------------

    def execute(self, msg: protocol.Message) -> int:
        """Apply one decoded command frame. Returns an Ack status code."""
        try:
            if isinstance(msg, protocol.MoveTo):
                self.move_to(msg.vertex, float(msg.speed_code) or None)
            elif isinstance(msg, protocol.Stop):
                self.stop()
            elif isinstance(msg, protocol.SetSpeed):
                self.set_speed(float(msg.mm_s))
            elif isinstance(msg, protocol.Vibrate):
                pattern = VibrationPattern(
                    kind=protocol.VIBRATE_KINDS[msg.kind],
                    amplitude_mm=msg.amp_mm_x10 / 10.0,
                    period_s=msg.period_ms / 1000.0,
                    duration_s=msg.duration_ms / 1000.0,
                )
                self.play_vibration(pattern)
            elif isinstance(msg, protocol.RotateTurntable):
                self.rotate_turntable(msg.port)
            elif isinstance(msg, protocol.StreamImu):
                self.set_imu_stream(msg.rate_hz, msg.on)
            else:
                return 2
        except RobotBusyError:
            return 1
        except (CommandError, OrientationMismatchError, SimHaltedError, ValueError):
            return 2
        return 0

    # ------------------------------------------------------------------
    # stepping

    def step(self, dt_s: float) -> list[SimEvent]:
        if dt_s <= 0:
            raise ValueError("dt must be positive")
        if self._halted:
            raise SimHaltedError(
                "derailed" if self.derailed else "battery empty")
        self._credit_us += round(dt_s * 1e6)
        while self._credit_us >= _TICK_US and not self._halted:
            self._run_tick()
            self._credit_us -= _TICK_US
        return self.drain_events()

    def drain_events(self) -> list[SimEvent]:
        out = self._events
        self._events = []
        return out

    def drain_imu(self) -> list[ImuSample]:
        out = self._imu_queue
        self._imu_queue = []
        return out

    def run_until(self, t_s: float, dt_s: float = 0.05) -> list[SimEvent]:
        events: list[SimEvent] = []
        while self.time_s < t_s - 1e-9 and not self._halted:
            events.extend(self.step(min(dt_s, t_s - self.time_s)))
        return events

    def _run_tick(self) -> None:
        t0 = self._tick * TICK_S
        batch_start = len(self._events)

        if self._vibration is not None:
            pattern, started = self._vibration
            while self._vib_ticks_left and self._vib_ticks_left[0] <= t0 + TICK_S + 1e-9:
                tick_t = self._vib_ticks_left.pop(0)
                self._emit("VibrationTick", {
                    "displacement_mm": round(
                        vibration_displacement(pattern, tick_t - started - 1e-9), 3)},
                    at=tick_t)
            if t0 - started >= pattern.duration_s - 1e-9:
                self._vibration = None
                self._vib_ticks_left = []

        disturbance = self._disturbance_at(t0)
        norm = self._physical_gnorm(disturbance)
        self._update_slip(norm, t0)

        moving = False
        if not self.derailed and isinstance(self.locus, SegmentLocus):
            moving = self._advance_segment(t0)

        rotating = False
        if not self.derailed and self._rotor_target is not None:
            rotating = True
            self._advance_rotor(t0)

        self._sample_imu(t0)
        self._drain_battery(t0, moving, rotating)
        self._tick += 1

        batch = self._events[batch_start:]
        if batch:
            batch.sort(key=lambda e: e.time)
            self._events[batch_start:] = batch

    # --- per-tick pieces ---------------------------------------------

    def _advance_segment(self, t0: float) -> bool:
        assert isinstance(self.locus, SegmentLocus)
        seg = self.layout.segments[self.locus.segment]
        loc = self.locus
        sign = 1.0 if loc.heading_ab else -1.0

        if self.slip is SlipState.SLIP:
            v_signed = -sign * SLIP_SETBACK_MM_S
            commanded = 0.0
        elif self._move_target is not None:
            angle = seg.angle_at(loc.s_mm, loc.heading_ab)
            commanded = self.commanded_speed if self.commanded_speed is not None \
                else speed_at(self.profile, angle, self.payload_g)
            v_signed = sign * commanded
        else:
            return False

        s_new, cross_frac = integrate_tick(loc.s_mm, seg.length_mm, v_signed, TICK_S)
        if commanded:
            self.dead_reckon = dead_reckon_update(self.dead_reckon, TICK_S, commanded)
        if cross_frac >= 0.0:
            t_cross = t0 + cross_frac * TICK_S
            vertex = seg.endpoints[1] if s_new >= seg.length_mm else seg.endpoints[0]
            self._register_vertex(vertex, t_cross)
            if vertex == self._move_target:
                self.locus = VertexLocus(vertex)
                self._move_target = None
                self._emit("Arrived", {"vertex": vertex}, at=t_cross)
            else:
                # pushed backwards over the start vertex while slipping
                self.locus = replace(loc, s_mm=s_new)
        else:
            self.locus = replace(loc, s_mm=s_new)
        return self._move_target is not None or commanded > 0

    def _advance_rotor(self, t0: float) -> None:
        assert isinstance(self.locus, RotorLocus)
        target = self._rotor_target
        step = ROTOR_RATE_DPS * TICK_S * self._rotor_sign
        angle = self.locus.angle_deg + step
        done = (self._rotor_sign > 0 and angle >= target - 1e-9) or \
               (self._rotor_sign < 0 and angle <= target + 1e-9)
        if done:
            frac = abs(target - self.locus.angle_deg) / abs(step)
            self.locus = replace(self.locus, angle_deg=target % 360.0)
            self._rotor_target = None
            self._rotor_sign = 0.0
            self._emit("TurntableStop",
                       {"turntable": self.locus.turntable,
                        "angle_deg": round(self.locus.angle_deg, 6)},
                       at=t0 + min(frac, 1.0) * TICK_S)
        else:
            self.locus = replace(self.locus, angle_deg=angle)

    def _update_slip(self, norm: float, t0: float) -> None:
        if self.derailed:
            return
        state = slip_state(self.profile, norm)
        if state is SlipState.INLAY_BREACH:
            self.derailed = True
            self.slip = state
            self._halted = True
            self._move_target = None
            self._rotor_target = None
            self._emit("Derailed", {"g": round(norm, 3)}, at=t0)
            return
        if state is SlipState.SLIP and self.slip is not SlipState.SLIP:
            self._emit("SlipStart", {"g": round(norm, 3)}, at=t0)
        elif state is SlipState.GRIP and self.slip is SlipState.SLIP:
            self._emit("SlipStop", {}, at=t0)
        self.slip = state
        if state is SlipState.GRIP and isinstance(self.locus, SegmentLocus):
            creep = micro_slip_mm(self.profile, norm)
            window = int(t0 / ENVELOPE_WINDOW_S)
            if creep > 0.0 and window != self._micro_window:
                self._micro_window = window
                loc = self.locus
                seg = self.layout.segments[loc.segment]
                sign = 1.0 if loc.heading_ab else -1.0
                s_back = min(max(loc.s_mm - sign * creep, 0.0), seg.length_mm)
                self.locus = replace(loc, s_mm=s_back)

    def _sample_imu(self, t0: float) -> None:
        if not self._imu_on:
            return
        period = 1.0 / self._imu_rate
        k = math.ceil(round(t0 / period, 9))
        while k * period < t0 + TICK_S - 1e-12:
            t_k = k * period
            if t_k >= t0 - 1e-12:
                sample = self.synthesize_imu(t_k)
                self._imu_queue.append(sample)
                self._emit("ImuSampleEmitted", {"seq": self._imu_seq}, at=t_k)
                self._imu_seq += 1
            k += 1

    def _drain_battery(self, t0: float, moving: bool, rotating: bool) -> None:
        flags = ActivityFlags(moving=False, imu_active=self._imu_on,
                              ble_connected=self.ble_connected)
        draw = current_draw(self.power, flags)
        motors = 0
        if moving or self._vibration is not None:
            motors = 2
        elif rotating:
            motors = 1
        draw += motors * self.power.motor_each_ma
        self.battery_mah = max(0.0, self.battery_mah - draw * TICK_S / 3600.0)
        low = BATTERY_LOW_FRACTION * self.power.battery_capacity_mah
        if self.battery_mah <= low and not self._battery_low_fired:
            self._battery_low_fired = True
            self._emit("BatteryLow", {"remaining_mah": round(self.battery_mah, 4)}, at=t0)
        if self.battery_mah <= 0.0:
            self._halted = True

    # ------------------------------------------------------------------
    # sensing

    def _register_vertex(self, vertex: int, t: float) -> None:
        if self.last_vertex != vertex:
            self.previous_vertex = self.last_vertex
            self.last_vertex = vertex
        self.dead_reckon = dead_reckon_anchor(vertex)
        self._emit("HallDetect", {"vertex": vertex}, at=t)

    def set_connector_state(self, connector_id: int, state: str) -> None:
        if connector_id not in self.layout.connectors:
            raise CommandError(f"unknown connector {connector_id}")
        if state not in ("attached", "detached"):
            raise ValueError(f"connector state must be attached/detached, got {state!r}")
        if state == "detached":
            self.detached_connectors.add(connector_id)
        else:
            self.detached_connectors.discard(connector_id)

    def _segment_between(self, a: int, b: int):
        detached = {self.layout.connectors[c].segment
                    for c in self.detached_connectors}
        best = None
        for seg in self.layout.segments_at(a):
            if seg.id in detached or b not in seg.endpoints or a == b:
                continue
            if best is None or (seg.length_mm, seg.id) < (best.length_mm, best.id):
                best = seg
        return best

    def _sway_offset(self, segment_id: int) -> float:
        if self.cloth_sway_mm == 0.0:
            return 0.0
        rng = random.Random(f"{self.seed}:sway:{segment_id}".encode())
        return rng.gauss(0.0, self.cloth_sway_mm)

    def _orientation(self) -> tuple[float, float, float]:
        """(incline deg, facing deg, lateral sign) for the current locus."""
        if isinstance(self.locus, VertexLocus):
            v = self.layout.vertices[self.locus.vertex]
            return v.incline_deg, v.facing_deg, 1.0
        if isinstance(self.locus, SegmentLocus):
            seg = self.layout.segments[self.locus.segment]
            s = min(max(self.locus.s_mm + self._sway_offset(seg.id), 0.0), seg.length_mm)
            theta = seg.angle_at(s, self.locus.heading_ab)
            va = self.layout.vertices[seg.endpoints[0]]
            vb = self.layout.vertices[seg.endpoints[1]]
            frac = s / seg.length_mm
            phi = (va.facing_deg + _wrap180(vb.facing_deg - va.facing_deg) * frac) % 360.0
            return theta, phi, (1.0 if self.locus.heading_ab else -1.0)
        if isinstance(self.locus, RotorLocus):
            return 0.0, 0.0, 1.0  # rotor handled separately in _accel_base
        return 0.0, 0.0, 1.0

    def _accel_base(self, disturbance: tuple[float, float, float]) -> tuple[float, float, float, float]:
        if isinstance(self.locus, RotorLocus):
            tilt = math.radians(TURNTABLE_TILT_DEG)
            psi = math.radians(self.locus.angle_deg - self.locus.entry_deg)
            ux = math.sin(tilt) * math.cos(psi) + TURNTABLE_STEP[0]
            uy = math.sin(tilt) * math.sin(psi) + TURNTABLE_STEP[1]
            uz = math.cos(tilt) + TURNTABLE_STEP[2]
            n = math.sqrt(ux * ux + uy * uy + uz * uz)
            ax = ux / n + disturbance[0]
            ay = uy / n + disturbance[1]
            az = uz / n + disturbance[2]
            return ax, ay, az, math.sqrt(ax * ax + ay * ay + az * az)
        theta, phi, y_sign = self._orientation()
        return body_accel(theta, phi, y_sign, *disturbance)

    def _physical_gnorm(self, disturbance) -> float:
        return self._accel_base(disturbance)[3]

    def _disturbance_at(self, t: float) -> tuple[float, float, float]:
        window = int(t / ENVELOPE_WINDOW_S)
        peak = 0.0
        for start, duration, _kind, p in self._activities:
            if start <= t < start + duration:
                peak = max(peak, p)
        spike = 0.0
        for start, duration, p in self._spikes:
            if start <= t < start + duration:
                spike = max(spike, p)
        dx = dy = dz = 0.0
        if peak > 1.0:
            rng = random.Random(f"{self.seed}:act:{window}".encode())
            mag = (peak - 1.0) * (0.3 + 0.7 * rng.random() ** 2)
            theta = math.acos(2.0 * rng.random() - 1.0)
            phi = 2.0 * math.pi * rng.random()
            dx = mag * math.sin(theta) * math.cos(phi)
            dy = mag * math.sin(theta) * math.sin(phi)
            dz = mag * math.cos(theta)
        if spike > 0.0:
            # align with the gravity reaction so the norm hits the peak exactly
            gx, gy, gz, gn = self._accel_base((0.0, 0.0, 0.0))
            if gn > 1e-9:
                scale = (spike - 1.0) / gn
                dx += gx * scale
                dy += gy * scale
                dz += gz * scale
        return dx, dy, dz

    def synthesize_imu(self, t: float | None = None) -> ImuSample:
        """One IMU reading at time t: gravity in the robot frame, activity
        disturbance, and zero-mean sensor noise.
        """
        t = self.time_s if t is None else t
        ax, ay, az, _ = self._accel_base(self._disturbance_at(t))
        rng = random.Random(f"{self.seed}:imu:{round(t * 1e6)}".encode())
        ax += rng.gauss(0.0, self.imu_noise_g)
        ay += rng.gauss(0.0, self.imu_noise_g)
        az += rng.gauss(0.0, self.imu_noise_g)

        gx = gy = gz = 0.0
        if isinstance(self.locus, RotorLocus) and self._rotor_target is not None:
            gz = ROTOR_RATE_DPS * self._rotor_sign
        elif isinstance(self.locus, SegmentLocus) and self._move_target is not None:
            seg = self.layout.segments[self.locus.segment]
            angle = seg.angle_at(self.locus.s_mm, self.locus.heading_ab)
            v = self.commanded_speed if self.commanded_speed is not None \
                else speed_at(self.profile, angle, self.payload_g)
            ds = 1.0 if self.locus.heading_ab else -1.0
            th0, ph0, _ = self._orientation()
            s_next = min(max(self.locus.s_mm + ds, 0.0), seg.length_mm)
            th1 = seg.angle_at(s_next, self.locus.heading_ab)
            va = self.layout.vertices[seg.endpoints[0]]
            vb = self.layout.vertices[seg.endpoints[1]]
            ph1 = (va.facing_deg + _wrap180(vb.facing_deg - va.facing_deg)
                   * (s_next / seg.length_mm)) % 360.0
            gy = _wrap180(th1 - th0) * v  # pitch rate, deg/s
            gx = _wrap180(ph1 - ph0) * v  # roll rate
        for start, duration, rates in self._user_rotation:
            if start <= t < start + duration:
                gx += rates[0]
                gy += rates[1]
                gz += rates[2]
        gx += rng.gauss(0.0, GYRO_NOISE_DPS)
        gy += rng.gauss(0.0, GYRO_NOISE_DPS)
        gz += rng.gauss(0.0, GYRO_NOISE_DPS)
        return ImuSample(t=t, accel=(ax, ay, az), gyro=(gx, gy, gz))

    # ------------------------------------------------------------------
    # snapshots and logging

    def snapshot(self) -> dict:
        if isinstance(self.locus, VertexLocus):
            locus = {"kind": "vertex", "vertex": self.locus.vertex,
                     "label": self.layout.vertices[self.locus.vertex].label}
        elif isinstance(self.locus, SegmentLocus):
            locus = {"kind": "segment", "segment": self.locus.segment,
                     "s_mm": round(self.locus.s_mm, 3),
                     "heading_ab": self.locus.heading_ab}
        elif isinstance(self.locus, RotorLocus):
            locus = {"kind": "turntable", "turntable": self.locus.turntable,
                     "angle_deg": round(self.locus.angle_deg, 3)}
        else:
            locus = {"kind": "unplaced"}
        return {
            "time": round(self.time_s, 6),
            "locus": locus,
            "last_vertex": self.last_vertex,
            "previous_vertex": self.previous_vertex,
            "battery_mah": round(self.battery_mah, 4),
            "slip": self.slip.value,
            "derailed": self.derailed,
            "busy": self.busy,
            "dead_reckon": {
                "anchor_vertex": self.dead_reckon.anchor_vertex,
                "offset_mm": round(self.dead_reckon.offset_mm, 3),
                "uncertainty_mm": (round(self.dead_reckon.uncertainty_mm, 3)
                                   if math.isfinite(self.dead_reckon.uncertainty_mm) else None),
            },
        }

    def _emit(self, kind: str, data: dict, at: float | None = None) -> None:
        self._events.append(SimEvent(self.time_s if at is None else at, kind, data))


# ---------------------------------------------------------------------------
# scripted runs

def run_script(sim: Simulator, entries: list[dict], duration_s: float,
               dt_s: float = 0.05) -> list[SimEvent]:
    """Drive a sim from a list of timed operations and collect every event.

    Each entry: {"t": seconds, "op": name, ...args}. Ops: place, move_to,
    stop, set_speed, rotate, rotate_by, exit, vibrate, stream_imu, inject,
    spike. Vertices may be given by label.
    """
    events: list[SimEvent] = []

    def vertex_id(ref):
        if isinstance(ref, str):
            return sim.layout.vertex_by_label(ref).id
        return int(ref)

    pending = sorted(enumerate(entries), key=lambda p: (float(p[1]["t"]), p[0]))
    for _, entry in pending:
        t = float(entry["t"])
        if t > sim.time_s:
            try:
                events.extend(sim.run_until(t, dt_s))
            except SimHaltedError:
                events.extend(sim.drain_events())
                return events
        op = entry["op"]
        if op == "place":
            sim.place_at_vertex(vertex_id(entry["vertex"]))
        elif op == "move_to":
            sim.move_to(vertex_id(entry["vertex"]), entry.get("speed"))
        elif op == "stop":
            sim.stop()
        elif op == "set_speed":
            sim.set_speed(entry.get("mm_s"))
        elif op == "rotate":
            sim.rotate_turntable(int(entry["port"]))
        elif op == "rotate_by":
            sim.rotate_by(float(entry["degrees"]))
        elif op == "exit":
            ref = entry.get("vertex")
            sim.exit_turntable(None if ref is None else vertex_id(ref))
        elif op == "vibrate":
            sim.play_vibration(VibrationPattern(
                kind=entry["kind"], amplitude_mm=float(entry["amplitude_mm"]),
                period_s=float(entry["period_s"]), duration_s=float(entry["duration_s"])))
        elif op == "stream_imu":
            sim.set_imu_stream(int(entry.get("rate_hz", TELEMETRY_IMU_HZ)),
                               bool(entry.get("on", True)))
        elif op == "inject":
            sim.inject_activity(entry["activity"], float(entry["duration_s"]))
        elif op == "spike":
            sim.inject_spike(float(entry["peak_g"]), float(entry["duration_s"]))
        else:
            raise ValueError(f"unknown script op {op!r}")
        events.extend(sim.drain_events())
    if duration_s > sim.time_s:
        try:
            events.extend(sim.run_until(duration_s, dt_s))
        except SimHaltedError:
            events.extend(sim.drain_events())
    return events


def events_to_log(events: list[SimEvent]) -> str:
    return "\n".join(e.to_line() for e in events) + ("\n" if events else "")
