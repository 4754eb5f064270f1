"""Controller behavior: plans become frame sequences, arrivals drive the
position estimate, the lossy link retries, and peer transfer moves the
robot between controllers without ever duplicating it."""

import random

import pytest

from railbot import protocol
from railbot.controller import (
    BridgeDetachedError,
    Controller,
    LinkDownError,
    PeerUnreachableError,
    RobotAbsentError,
    SEND_RETRIES,
    SimLink,
    UnknownPositionError,
    transfer_robot,
)
from railbot.layout import generalized_layout
from railbot.motion import traversal_time
from railbot.routing import Direction, NoRouteError
from railbot.simcore import RobotBusyError, Simulator


@pytest.fixture(scope="module")
def layout():
    return generalized_layout()


@pytest.fixture
def controller(layout):
    sim = Simulator(layout, seed=0)
    return Controller(layout, SimLink(sim))


def vid(layout, label):
    return layout.vertex_by_label(label).id


def loss_draws(seed, rate, n):
    """The link's own loss lottery, recomputed independently."""
    return [random.Random(f"{seed}:link:{k}".encode()).random() < rate
            for k in range(1, n + 1)]


# ---------------------------------------------------------------------------
# link

class TestLink:
    def test_rejects_bad_loss_rate(self, layout):
        sim = Simulator(layout, seed=0)
        with pytest.raises(ValueError):
            SimLink(sim, loss_rate=1.0)
        with pytest.raises(ValueError):
            SimLink(sim, loss_rate=-0.1)

    def test_loss_pattern_matches_seeded_lottery(self, layout):
        sim = Simulator(layout, seed=0)
        link = SimLink(sim, loss_rate=0.5, seed=9)
        expected = loss_draws(9, 0.5, 20)
        got = [link.send(protocol.Stop()) is None for _ in range(20)]
        assert got == expected
        assert any(got) and not all(got)  # the chosen seed shows both

    def test_lossless_link_acks_every_frame(self, controller):
        controller.set_position("left_wrist")
        for _ in range(50):
            assert controller.link.send(protocol.Stop()) == 0

    def test_retry_rides_out_a_dropped_frame(self, layout):
        # find a seed whose lottery starts drop-then-deliver
        seed = next(s for s in range(100)
                    if loss_draws(s, 0.5, 2) == [True, False])
        sim = Simulator(layout, seed=0)
        c = Controller(layout, SimLink(sim, loss_rate=0.5, seed=seed))
        c.set_position("left_wrist")
        c.goto("left_forearm")
        assert c.link._sent == 2  # one loss, one delivery
        c.wait_idle()
        assert c.position == vid(layout, "left_forearm")

    def test_every_attempt_lost_raises_link_down(self, layout):
        attempts = 1 + SEND_RETRIES
        seed = next(s for s in range(1000)
                    if all(loss_draws(s, 0.9, attempts)))
        sim = Simulator(layout, seed=0)
        c = Controller(layout, SimLink(sim, loss_rate=0.9, seed=seed))
        c.set_position("left_wrist")
        with pytest.raises(LinkDownError):
            c.goto("left_forearm")

    def test_latency_defers_the_command(self, layout):
        sim = Simulator(layout, seed=0)
        c = Controller(layout, SimLink(sim, latency_s=0.2))
        c.set_position("left_wrist")
        c.goto("left_forearm")
        assert not sim.busy          # frame still in flight
        assert c.link.busy           # but the link knows it is pending
        c.tick(0.1)
        assert not sim.busy
        c.tick(0.15)                 # latency expires mid-poll
        assert sim.busy
        c.wait_idle()
        assert c.position == vid(layout, "left_forearm")

    def test_latency_preserves_arrival_order(self, layout):
        sim = Simulator(layout, seed=0)
        c = Controller(layout, SimLink(sim, latency_s=0.05))
        c.set_position("left_wrist")
        c.goto("left_elbow")
        c.wait_idle()
        arrived = [e.data["vertex"] for e in c.events if e.kind == "Arrived"]
        assert arrived == [vid(layout, "left_forearm"), vid(layout, "left_elbow")]


# ---------------------------------------------------------------------------
# goto

class TestGoto:
    def test_needs_a_position_first(self, controller):
        with pytest.raises(UnknownPositionError):
            controller.goto("left_elbow")
        with pytest.raises(UnknownPositionError):
            controller.route("left_elbow")

    def test_unknown_label_is_an_error(self, controller):
        controller.set_position("left_wrist")
        with pytest.raises(KeyError):
            controller.goto("no_such_place")

    def test_arm_climb_plan(self, layout, controller):
        controller.set_position("left_wrist")
        plan = controller.goto("left_shoulder")
        assert len(plan.frames) == 4
        assert all(isinstance(f, protocol.MoveTo) for f in plan.frames)
        assert plan.rotations == ()
        assert plan.direction is Direction.FORWARD
        assert plan.expected_s == pytest.approx(4.0, abs=0.05)
        controller.wait_idle()
        assert controller.position == vid(layout, "left_shoulder")
        assert controller.previous_vertex == vid(layout, "left_upper_arm")

    def test_rotor_crossing_emits_rotate_frames(self, controller):
        controller.set_position("left_wrist")
        plan = controller.goto("lower_back")
        rotor_hops = sum(1 for s in plan.path.segments if s is None)
        spins = [f for f in plan.frames
                 if isinstance(f, protocol.RotateTurntable)]
        assert rotor_hops >= 1
        assert len(spins) == rotor_hops
        assert len(plan.rotations) == rotor_hops

    def test_expected_time_matches_the_ride(self, layout, controller):
        controller.set_position("left_wrist")
        plan = controller.goto("lower_back")
        start = controller.link.sim.time_s
        controller.wait_idle()
        took = controller.link.sim.time_s - start
        assert took == pytest.approx(plan.expected_s, abs=0.5)
        assert controller.position == vid(layout, "lower_back")

    def test_second_goto_while_riding_is_refused(self, controller):
        controller.set_position("left_wrist")
        controller.goto("left_elbow")
        with pytest.raises(RobotBusyError):
            controller.goto("left_shoulder")
        controller.wait_idle()
        controller.goto("left_shoulder")  # fine once idle

    def test_send_frame_refused_mid_plan(self, controller):
        controller.set_position("left_wrist")
        controller.goto("left_elbow")
        with pytest.raises(RobotBusyError):
            controller.send_frame(protocol.Stop())

    def test_goto_here_is_a_no_op_plan(self, layout, controller):
        controller.set_position("left_elbow")
        plan = controller.goto("left_elbow")
        assert plan.frames == ()
        assert plan.expected_s == 0.0
        controller.wait_idle()
        assert controller.position == vid(layout, "left_elbow")

    def test_detached_dock_cuts_off_the_hanger(self, controller):
        controller.set_position("left_wrist")
        controller.set_connector(2, "detached")
        with pytest.raises(NoRouteError):
            controller.goto("key_hanger")
        controller.set_connector(2, "attached")
        controller.goto("key_hanger")
        controller.wait_idle()
        assert controller.state()["locus"]["label"] == "key_hanger"

    def test_arrivals_track_the_sim_exactly(self, layout, controller):
        controller.set_position("left_wrist")
        controller.goto("left_shoulder")
        controller.wait_idle()
        snap = controller.link.snapshot()
        assert snap["last_vertex"] == controller.position
        assert snap["previous_vertex"] == controller.previous_vertex

    def test_reversal_rule_applies_on_the_way_back(self, controller):
        controller.set_position("left_wrist")
        controller.goto("left_elbow")
        controller.wait_idle()
        plan = controller.goto("left_wrist")
        assert plan.direction is Direction.REVERSED


# ---------------------------------------------------------------------------
# mid-segment resume

def park_between(controller, toward, stop_after_mm):
    """Drive toward a neighbor and stop partway along the segment."""
    controller.send_frame(protocol.MoveTo(
        vertex=controller.vertex_id(toward), speed_code=0))
    while True:
        controller.tick(0.01)
        locus = controller.link.snapshot()["locus"]
        if locus["kind"] == "segment" and locus["s_mm"] >= stop_after_mm:
            controller.send_frame(protocol.Stop())
            return controller.link.snapshot()["locus"]


class TestMidSegmentResume:
    def test_resume_toward_target_skips_the_backtrack(self, layout, controller):
        controller.set_position("left_wrist")
        park_between(controller, "left_forearm", 30.0)
        plan = controller.goto("left_elbow")
        first = plan.frames[0]
        assert isinstance(first, protocol.MoveTo)
        assert first.vertex == vid(layout, "left_forearm")
        # already partway there, so quicker than a fresh start
        fresh = controller.route("left_elbow", source="left_wrist")
        assert plan.expected_s < traversal_time(
            layout, fresh, controller.profile)
        controller.wait_idle()
        assert controller.position == vid(layout, "left_elbow")
        assert controller.previous_vertex == vid(layout, "left_forearm")

    def test_resume_backtracks_when_target_is_behind(self, layout, controller):
        controller.set_position("left_wrist")
        park_between(controller, "left_forearm", 30.0)
        plan = controller.goto("left_wrist")
        assert [f.vertex for f in plan.frames] == [vid(layout, "left_wrist")]
        controller.wait_idle()
        assert controller.position == vid(layout, "left_wrist")
        assert controller.state()["locus"]["label"] == "left_wrist"


# ---------------------------------------------------------------------------
# auxiliary commands

class TestAuxCommands:
    def test_vibrate_validates_the_kind(self, controller):
        controller.set_position("left_wrist")
        with pytest.raises(ValueError):
            controller.vibrate("thud", 1.0, 0.1, 0.2)

    def test_vibrate_plays_through_the_wire(self, controller):
        controller.set_position("left_wrist")
        controller.vibrate("square", 2.0, 0.1, 0.3)
        controller.wait_idle()
        ticks = [e for e in controller.events if e.kind == "VibrationTick"]
        assert ticks, "haptic pattern never played"

    def test_vibrate_while_riding_is_refused(self, controller):
        controller.set_position("left_wrist")
        controller.goto("left_elbow")
        controller.tick(0.1)
        with pytest.raises(RobotBusyError):
            controller.vibrate("square", 2.0, 0.1, 0.3)

    def test_imu_stream_toggles(self, controller):
        controller.set_position("left_wrist")
        controller.stream_imu(15, True)
        controller.tick(1.0)
        assert controller.link.drain_imu()
        controller.stream_imu(15, False)
        controller.link.drain_imu()
        controller.tick(1.0)
        assert controller.link.drain_imu() == []

    def test_wait_idle_times_out_but_the_plan_survives(self, layout, controller):
        controller.set_position("left_wrist")
        controller.goto("left_shoulder")
        with pytest.raises(TimeoutError):
            controller.wait_idle(timeout_s=0.5)
        controller.wait_idle()  # plenty of time now
        assert controller.position == vid(layout, "left_shoulder")

    def test_state_reports_both_views(self, layout, controller):
        controller.set_position("left_wrist")
        state = controller.state()
        assert state["owns_robot"] is True
        assert state["scenario"] is None
        assert state["controller_position"] == vid(layout, "left_wrist")
        assert state["locus"]["label"] == "left_wrist"


# ---------------------------------------------------------------------------
# peer transfer

@pytest.fixture
def pair(layout):
    a = Controller(layout, SimLink(Simulator(layout, seed=0)))
    b = Controller(layout, SimLink(Simulator(layout, seed=1)))
    b.owns_robot = False
    return a, b


class TestTransfer:
    def test_round_trip_carries_the_battery(self, layout, pair):
        a, b = pair
        a.set_position("left_wrist")
        a.goto("right_wrist")
        a.wait_idle()
        drained = a.link.sim.battery_mah
        assert drained < a.link.sim.power.battery_capacity_mah

        state = transfer_robot(a, b)
        assert state["battery_mah"] == pytest.approx(drained)
        assert not a.owns_robot and a.position is None
        assert b.owns_robot
        assert b.state()["locus"]["label"] == "peer_wrist"

        # ride in, come back to the bridge, and hand it home
        b.goto("right_wrist")
        b.wait_idle()
        back = transfer_robot(b, a)
        assert back["battery_mah"] == pytest.approx(b.link.sim.battery_mah)
        assert a.owns_robot and not b.owns_robot

    def test_exactly_one_owner_at_any_instant(self, pair):
        a, b = pair
        a.set_position("right_wrist")
        transfer_robot(a, b)
        with pytest.raises(RobotAbsentError):
            a.goto("left_wrist")
        with pytest.raises(RobotAbsentError):
            transfer_robot(a, b)

    def test_needs_a_live_peer(self, pair):
        a, _ = pair
        a.set_position("right_wrist")
        with pytest.raises(PeerUnreachableError):
            transfer_robot(a, None)

    def test_detached_bridge_blocks_transfer(self, pair):
        a, b = pair
        a.set_position("right_wrist")
        a.set_connector(3, "detached")
        with pytest.raises(BridgeDetachedError):
            transfer_robot(a, b)

    def test_peer_side_bridge_must_be_attached_too(self, pair):
        a, b = pair
        a.set_position("right_wrist")
        b.overlay = b.overlay.__class__(
            detached=b.overlay.detached | {3})
        with pytest.raises(BridgeDetachedError):
            transfer_robot(a, b)

    def test_robot_must_sit_at_the_bridge(self, pair):
        a, b = pair
        a.set_position("left_wrist")
        with pytest.raises(BridgeDetachedError):
            transfer_robot(a, b)
