"""Scripted application behaviors on top of the controller: exercise
coaching, the timed arm-wave trial, tap-logged water tracking with the
robot as a physical gauge, and auscultation positioning.

Each scenario is a plain function that drives a Controller and returns
the structured events it emitted; the same seed and script always
reproduce the same log.  Signal analysis helpers (pitch tracking, rep
counting, the plank form monitor) are value-in/value-out so they can be
tested on synthetic streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import protocol
from .controller import Controller
from .simcore import ImuSample, SimEvent, detect_tap

SCENARIO_NAMES = ("workout", "dance_arm_wave", "water_tracker",
                  "auscultation_positioning")

PLANK_THRESHOLD_DEG = 10.0  # sag/overextension beyond this is a form fault
REP_PITCH_DEG = 20.0
REP_NOMINAL_S = 3.0
WAVE_TARGET_S = 3.0
WAVE_MIN_RATE_DPS = 15.0
WATER_MAX_GLASSES = 6
PARK_TOL_MM = 2.0
AUSCULTATION_RATE_SPS = 10_000
IMU_RATE_HZ = 15
TAP_WATCH_HZ = 50
TAP_REFRACTORY_S = 0.3  # debounce: a spike's tail must not count twice

EXERCISE_STATION = {"squat": "left_knee", "plank": "mid_back",
                    "pushup": "left_elbow"}

# the wrist-to-shoulder run doubles as the water gauge and the wave track
ARM_CHAIN = ("left_wrist", "left_forearm", "left_elbow", "left_upper_arm",
             "left_shoulder")


class BadScenarioError(ValueError):
    """Unknown scenario name or invalid parameters."""


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise BadScenarioError(f"unknown scenario {self.name!r}")
        _VALIDATORS[self.name](dict(self.params))


def _validate_workout(params: dict) -> None:
    routine = params.get("routine")
    if not routine:
        raise BadScenarioError("workout needs a non-empty routine")
    for entry in routine:
        exercise = entry.get("exercise")
        if exercise not in EXERCISE_STATION:
            raise BadScenarioError(f"unknown exercise {exercise!r}")
        if exercise == "plank":
            if entry.get("seconds", 5.0) <= 0:
                raise BadScenarioError("plank seconds must be positive")
        elif entry.get("reps", 3) < 1:
            raise BadScenarioError("reps must be at least 1")


def _validate_arm_wave(params: dict) -> None:
    if params.get("target_s", WAVE_TARGET_S) <= 0:
        raise BadScenarioError("target_s must be positive")


def _validate_water(params: dict) -> None:
    glasses = params.get("glasses", WATER_MAX_GLASSES)
    if glasses < 1:
        raise BadScenarioError("glasses must be at least 1")
    count = params.get("count", 0)
    if not 0 <= count <= glasses:
        raise BadScenarioError(f"count must be in [0, {glasses}]")


def _validate_auscultation(params: dict) -> None:
    if not params.get("points"):
        raise BadScenarioError("auscultation needs at least one point")


_VALIDATORS = {
    "workout": _validate_workout,
    "dance_arm_wave": _validate_arm_wave,
    "water_tracker": _validate_water,
    "auscultation_positioning": _validate_auscultation,
}


# ---------------------------------------------------------------------------
# signal analysis helpers

def pitch_track(samples: Sequence[ImuSample],
                rate_hz: float = IMU_RATE_HZ) -> list[float]:
    """Integrated pitch-rate gyro in degrees, one value per sample.  The
    stream's start defines the calibrated neutral (zero)."""
    pitch = 0.0
    track = []
    for s in samples:
        pitch += s.gyro[1] / rate_hz
        track.append(pitch)
    return track


@dataclass
class PlankMonitor:
    """Incremental spine-form watcher: integrates pitch rate and fires
    once per excursion beyond the threshold (strictly beyond: landing
    exactly on it is still neutral form).  Re-arms when the pitch comes
    back inside.
    """

    rate_hz: float = IMU_RATE_HZ
    threshold_deg: float = PLANK_THRESHOLD_DEG
    pitch_deg: float = 0.0
    _armed: bool = True

    def feed(self, samples: Iterable[ImuSample]) -> list[tuple[float, float]]:
        faults = []
        for s in samples:
            self.pitch_deg += s.gyro[1] / self.rate_hz
            if self._armed and abs(self.pitch_deg) > self.threshold_deg:
                faults.append((s.t, self.pitch_deg))
                self._armed = False
            elif not self._armed and abs(self.pitch_deg) <= self.threshold_deg:
                self._armed = True
        return faults


def plank_monitor(samples: Sequence[ImuSample],
                  rate_hz: float = IMU_RATE_HZ,
                  threshold_deg: float = PLANK_THRESHOLD_DEG,
                  ) -> list[tuple[float, float]]:
    """Batch form of PlankMonitor: (t, pitch_deg) per form fault."""
    return PlankMonitor(rate_hz=rate_hz, threshold_deg=threshold_deg).feed(samples)


def count_reps(samples: Sequence[ImuSample], rate_hz: float = IMU_RATE_HZ,
               rep_deg: float = REP_PITCH_DEG) -> int:
    """Placeholder rep counter: completed pitch excursions beyond rep_deg
    and back.  Good enough to log progress; not a form judge."""
    reps = 0
    out = False
    for pitch in pitch_track(samples, rate_hz):
        if not out and abs(pitch) > rep_deg:
            out = True
        elif out and abs(pitch) <= rep_deg:
            out = False
            reps += 1
    return reps


# ---------------------------------------------------------------------------
# scenario plumbing

def _emit(controller: Controller, log: list[SimEvent], kind: str,
          data: dict) -> SimEvent:
    event = SimEvent(controller.link.sim.time_s, kind, data)
    log.append(event)
    controller.events.append(event)
    return event


def _goto_and_wait(controller: Controller, target: str,
                   log: list[SimEvent]) -> None:
    plan = controller.goto(target)
    controller.wait_idle()
    _emit(controller, log, "ScenarioMove",
          {"target": target, "hops": plan.path.hops,
           "expected_s": round(plan.expected_s, 3)})


def _dwell(controller: Controller, seconds: float) -> list[ImuSample]:
    """Sit for a stretch of time, returning the IMU samples seen."""
    sim = controller.link.sim
    end = sim.time_s + seconds
    samples: list[ImuSample] = []
    while sim.time_s < end - 1e-9:
        controller.tick(0.05)
        samples.extend(controller.link.drain_imu())
    return samples


# ---------------------------------------------------------------------------
# workout tracker and form coach

def _sweep_step(controller: Controller, target: str) -> None:
    controller.send_frame(protocol.MoveTo(
        vertex=controller.vertex_id(target), speed_code=0))


def run_plank_coach(controller: Controller, seconds: float,
                    log: list[SimEvent] | None = None) -> list[SimEvent]:
    """Sweep back and forth across the back while watching spine pitch;
    each sag or overextension stops the sweep, fires a quick vibration,
    and logs a FormFault.
    """
    log = [] if log is None else log
    sim = controller.link.sim
    monitor = PlankMonitor()
    controller.stream_imu(IMU_RATE_HZ, True)
    controller.link.drain_imu()
    ends = ("lower_back", "mid_back")
    leg = 0
    _sweep_step(controller, ends[leg])
    end_t = sim.time_s + seconds
    while sim.time_s < end_t - 1e-9:
        controller.tick(0.05)
        pending = monitor.feed(controller.link.drain_imu())
        if pending:
            while pending:
                t, pitch = pending.pop(0)
                controller.send_frame(protocol.Stop())
                controller.vibrate("quick", 1.0, 0.1, 0.2)
                _emit(controller, log, "FormFault",
                      {"t": round(t, 3), "pitch_deg": round(pitch, 2)})
                # keep integrating through the pause so pitch stays honest
                pending.extend(monitor.feed(_dwell(controller, 0.3)))
            _sweep_step(controller, ends[leg])
        if not sim.busy:
            leg = 1 - leg
            _sweep_step(controller, ends[leg])
    controller.send_frame(protocol.Stop())
    controller.stream_imu(IMU_RATE_HZ, False)
    return log


def _run_workout(controller: Controller, params: Mapping) -> list[SimEvent]:
    log: list[SimEvent] = []
    for entry in params["routine"]:
        exercise = entry["exercise"]
        _goto_and_wait(controller, EXERCISE_STATION[exercise], log)
        _emit(controller, log, "StationReached",
              {"exercise": exercise, "station": EXERCISE_STATION[exercise]})
        if exercise == "plank":
            run_plank_coach(controller, float(entry.get("seconds", 5.0)), log)
        else:
            reps = int(entry.get("reps", 3))
            controller.stream_imu(IMU_RATE_HZ, True)
            controller.link.drain_imu()
            samples = _dwell(controller, reps * REP_NOMINAL_S)
            controller.stream_imu(IMU_RATE_HZ, False)
            _emit(controller, log, "RepCounted",
                  {"exercise": exercise, "target": reps,
                   "counted": count_reps(samples)})
    _emit(controller, log, "ScenarioDone", {"name": "workout"})
    return log


# ---------------------------------------------------------------------------
# dance arm wave

def run_arm_wave(controller: Controller, target_s: float = WAVE_TARGET_S,
                 expected_sign: int = 1,
                 min_rate_dps: float = WAVE_MIN_RATE_DPS) -> list[SimEvent]:
    """Ride shoulder-to-wrist in the target time while checking that the
    user's yaw rotation matches the wave at every landmark; a wrong or
    missing rotation aborts the run and sends the robot back up.

    The yaw channel is the clean one to judge: track motion never excites
    it, so whatever shows up there is the user.
    """
    log: list[SimEvent] = []
    chain = list(reversed(ARM_CHAIN))  # shoulder first
    if controller.position != controller.vertex_id(chain[0]):
        raise BadScenarioError("arm wave starts at the shoulder")
    total_mm = _chain_geometry(controller, ARM_CHAIN)[-1][2]
    speed = min(int(round(total_mm / target_s)), 255)
    controller.stream_imu(IMU_RATE_HZ, True)
    controller.link.drain_imu()
    _emit(controller, log, "WaveStart",
          {"target_s": target_s, "speed_mm_s": speed})
    verdict = "pass"
    failed_at = None
    for hop in chain[1:]:
        controller.send_frame(protocol.MoveTo(
            vertex=controller.vertex_id(hop), speed_code=speed))
        samples: list[ImuSample] = []
        while controller.link.busy:
            controller.tick(0.02)
            samples.extend(controller.link.drain_imu())
        samples.extend(controller.link.drain_imu())
        rates = [s.gyro[2] for s in samples]
        mean = sum(rates) / len(rates) if rates else 0.0
        if hop != chain[-1] and expected_sign * mean < min_rate_dps:
            verdict = "fail"
            failed_at = hop
            break
    controller.send_frame(protocol.SetSpeed(mm_s=0))
    controller.stream_imu(IMU_RATE_HZ, False)
    if verdict == "fail":
        _emit(controller, log, "WaveFail", {"landmark": failed_at})
        controller.goto(chain[0])  # return to the starting location
        controller.wait_idle()
        _emit(controller, log, "WaveReturned", {"at": chain[0]})
    else:
        _emit(controller, log, "WavePass", {"at": chain[-1]})
    return log


# ---------------------------------------------------------------------------
# water tracker: the robot is the gauge

def _chain_geometry(controller: Controller, labels: Sequence[str]):
    """(segment, chain_aligned, cumulative_end_mm) per link of the chain."""
    ids = [controller.vertex_id(l) for l in labels]
    out = []
    cum = 0.0
    for a, b in zip(ids, ids[1:]):
        seg = next(s for s in controller.layout.segments.values()
                   if set(s.endpoints) == {a, b})
        cum += seg.length_mm
        out.append((seg, seg.endpoints[0] == a, cum))
    return out


def _chain_arc(controller: Controller, labels: Sequence[str]) -> float:
    """Current position as mm along the chain, from telemetry."""
    geometry = _chain_geometry(controller, labels)
    locus = controller.link.snapshot()["locus"]
    if locus["kind"] == "vertex":
        ids = [controller.vertex_id(l) for l in labels]
        if locus["vertex"] not in ids:
            raise BadScenarioError("robot is off the display chain")
        i = ids.index(locus["vertex"])
        return 0.0 if i == 0 else geometry[i - 1][2]
    if locus["kind"] == "segment":
        for seg, aligned, cum in geometry:
            if seg.id == locus["segment"]:
                s = locus["s_mm"] if aligned else seg.length_mm - locus["s_mm"]
                return cum - seg.length_mm + s
    raise BadScenarioError("robot is off the display chain")


def park_at_fraction(controller: Controller, fraction: float,
                     labels: Sequence[str] = ARM_CHAIN) -> float:
    """Drive along the chain and stop at fraction * chain length; returns
    the parked arc position in mm."""
    if not 0.0 <= fraction <= 1.0:
        raise BadScenarioError(f"fraction must be in [0, 1], got {fraction}")
    geometry = _chain_geometry(controller, labels)
    ids = [controller.vertex_id(l) for l in labels]
    arcs = {v: (0.0 if i == 0 else geometry[i - 1][2])
            for i, v in enumerate(ids)}
    target = fraction * geometry[-1][2]
    while True:
        arc = _chain_arc(controller, labels)
        if abs(arc - target) <= PARK_TOL_MM:
            if controller.link.busy:
                controller.send_frame(protocol.Stop())
            return _chain_arc(controller, labels)
        forward = target > arc
        locus = controller.link.snapshot()["locus"]
        if locus["kind"] == "vertex":
            i = ids.index(locus["vertex"])
            hop = ids[i + 1] if forward else ids[i - 1]
        else:
            seg = next(g[0] for g in geometry if g[0].id == locus["segment"])
            aligned = next(g[1] for g in geometry if g[0] is seg)
            hop = seg.endpoints[1] if aligned == forward else seg.endpoints[0]
        controller.send_frame(protocol.MoveTo(vertex=hop, speed_code=0))
        if abs(arcs[hop] - target) <= PARK_TOL_MM:
            # the hop lands on the mark anyway; ride it out
            while controller.link.busy:
                controller.tick(0.01)
            continue
        while controller.link.busy:
            controller.tick(0.01)
            arc = _chain_arc(controller, labels)
            # stopping the tick after crossing leaves at most ~1 mm over
            if (forward and arc >= target) or (not forward and arc <= target):
                controller.send_frame(protocol.Stop())
                break


def _run_water(controller: Controller, params: Mapping) -> list[SimEvent]:
    log: list[SimEvent] = []
    glasses = int(params.get("glasses", WATER_MAX_GLASSES))
    count = int(params.get("count", 0))
    chain = params.get("chain", ARM_CHAIN)
    for n in range(count + 1):
        arc = park_at_fraction(controller, n / glasses, chain)
        _emit(controller, log, "WaterDisplay",
              {"count": n, "glasses": glasses,
               "fraction": round(n / glasses, 4), "arc_mm": round(arc, 1)})
    _emit(controller, log, "ScenarioDone", {"name": "water_tracker"})
    return log


def water_watch(controller: Controller, duration_s: float,
                glasses: int = WATER_MAX_GLASSES, count: int = 0,
                chain: Sequence[str] = ARM_CHAIN) -> list[SimEvent]:
    """Live variant: watch the IMU for tap patterns and advance the gauge
    on each one."""
    log: list[SimEvent] = []
    sim = controller.link.sim
    # 50 Hz so a 50 ms tap spike always lands on at least two samples
    controller.stream_imu(TAP_WATCH_HZ, True)
    controller.link.drain_imu()
    window: list[ImuSample] = []
    quiet_until = 0.0
    end = sim.time_s + duration_s
    while sim.time_s < end - 1e-9:
        controller.tick(0.05)
        window.extend(s for s in controller.link.drain_imu()
                      if s.t >= quiet_until)
        window = window[-TAP_WATCH_HZ:]  # one second of context
        if detect_tap(window) and count < glasses:
            count += 1
            quiet_until = window[-1].t + TAP_REFRACTORY_S
            window.clear()
            arc = park_at_fraction(controller, count / glasses, chain)
            _emit(controller, log, "WaterDisplay",
                  {"count": count, "glasses": glasses,
                   "fraction": round(count / glasses, 4),
                   "arc_mm": round(arc, 1)})
    controller.stream_imu(TAP_WATCH_HZ, False)
    return log


# ---------------------------------------------------------------------------
# auscultation positioning

def _run_auscultation(controller: Controller, params: Mapping) -> list[SimEvent]:
    log: list[SimEvent] = []
    dwell_s = float(params.get("dwell_s", 2.0))
    for point in params["points"]:
        _goto_and_wait(controller, point, log)
        start = controller.link.sim.time_s
        _dwell(controller, dwell_s)
        _emit(controller, log, "AuscultationSample",
              {"point": point, "t_start": round(start, 3),
               "dwell_s": dwell_s, "rate_sps": AUSCULTATION_RATE_SPS})
    _emit(controller, log, "ScenarioDone",
          {"name": "auscultation_positioning"})
    return log


# ---------------------------------------------------------------------------
# dispatch

def run_scenario(controller: Controller, script: ScenarioScript) -> list[SimEvent]:
    controller.scenario = script.name
    try:
        if script.name == "workout":
            return _run_workout(controller, script.params)
        if script.name == "dance_arm_wave":
            params = dict(script.params)
            return run_arm_wave(
                controller,
                target_s=float(params.get("target_s", WAVE_TARGET_S)),
                expected_sign=int(params.get("expected_sign", 1)),
            )
        if script.name == "water_tracker":
            return _run_water(controller, script.params)
        return _run_auscultation(controller, script.params)
    finally:
        controller.scenario = None
