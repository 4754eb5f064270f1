import math
import os
import random
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from railbot import _motionkernel_py as pykernel
from railbot import kernel

try:
    from railbot import _motionkernel as ckernel
except ImportError:
    ckernel = None

needs_compiled = pytest.mark.skipif(ckernel is None, reason="compiled kernel not built")


class TestSelection:
    def test_backend_identifies_itself(self):
        assert kernel.BACKEND in ("python", "compiled")

    def test_env_override_forces_python(self):
        out = subprocess.run(
            [sys.executable, "-c", "from railbot import kernel; print(kernel.BACKEND)"],
            env={**os.environ, "RAILBOT_KERNEL": "python"},
            capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"


class TestIntegrateTick:
    def test_no_crossing_mid_segment(self):
        s, frac = pykernel.integrate_tick(10.0, 100.0, 115.0, 0.01)
        assert s == pytest.approx(11.15)
        assert frac == -1.0

    def test_forward_crossing_fraction(self):
        # 1 mm short of the end at 100 mm/s: crosses at exactly frac 1.0
        s, frac = pykernel.integrate_tick(99.0, 100.0, 100.0, 0.01)
        assert s == 100.0
        assert frac == pytest.approx(1.0)

    def test_backward_crossing_fraction(self):
        s, frac = pykernel.integrate_tick(0.5, 100.0, -100.0, 0.01)
        assert s == 0.0
        assert frac == pytest.approx(0.5)

    def test_parked_at_boundary_does_not_recross(self):
        assert pykernel.integrate_tick(100.0, 100.0, 50.0, 0.01) == (100.0, -1.0)
        assert pykernel.integrate_tick(0.0, 100.0, -50.0, 0.01) == (0.0, -1.0)

    @given(st.floats(0, 500), st.floats(1, 500), st.floats(-300, 300))
    def test_result_always_clamped(self, s, length, v):
        s = min(s, length)
        s_new, frac = pykernel.integrate_tick(s, length, v, 0.01)
        assert 0.0 <= s_new <= length
        assert frac == -1.0 or 0.0 <= frac <= 1.0


class TestBodyAccel:
    def test_unit_norm_without_disturbance(self):
        for theta, phi in [(0, 0), (45, 90), (-60, 220), (90, 10)]:
            ax, ay, az, norm = pykernel.body_accel(theta, phi, 1.0, 0.0, 0.0, 0.0)
            assert norm == pytest.approx(1.0, abs=1e-12)

    def test_heading_flips_lateral_sign_only(self):
        fwd = pykernel.body_accel(30.0, 40.0, 1.0, 0.0, 0.0, 0.0)
        rev = pykernel.body_accel(30.0, 40.0, -1.0, 0.0, 0.0, 0.0)
        assert fwd[0] == rev[0]
        assert fwd[1] == -rev[1]
        assert fwd[2] == rev[2]


@needs_compiled
class TestParity:
    """The compiled kernel must be bit-identical to the Python twin, not
    merely close: simulation logs must not depend on the backend."""

    def test_integrate_tick_bits(self):
        rng = random.Random(1234)
        for _ in range(20000):
            length = rng.uniform(1.0, 500.0)
            s = rng.uniform(0.0, length)
            v = rng.uniform(-300.0, 300.0)
            assert pykernel.integrate_tick(s, length, v, 0.01) == \
                ckernel.integrate_tick(s, length, v, 0.01)

    def test_body_accel_bits(self):
        rng = random.Random(99)
        for _ in range(20000):
            args = (rng.uniform(-180, 180), rng.uniform(0, 360),
                    rng.choice([1.0, -1.0]),
                    rng.gauss(0, 2), rng.gauss(0, 2), rng.gauss(0, 2))
            assert pykernel.body_accel(*args) == ckernel.body_accel(*args)

    def test_gforce_norm_bits(self):
        rng = random.Random(7)
        for _ in range(5000):
            args = (rng.gauss(0, 3), rng.gauss(0, 3), rng.gauss(0, 3))
            assert pykernel.gforce_norm(*args) == ckernel.gforce_norm(*args)

    def test_sim_log_identical_across_backends(self):
        code = (
            "from railbot.layout import generalized_layout\n"
            "from railbot.simcore import Simulator, run_script, events_to_log\n"
            "script = [\n"
            "  {'t': 0.0, 'op': 'place', 'vertex': 'left_wrist'},\n"
            "  {'t': 0.0, 'op': 'stream_imu', 'rate_hz': 15, 'on': True},\n"
            "  {'t': 0.1, 'op': 'move_to', 'vertex': 'left_forearm'},\n"
            "  {'t': 1.2, 'op': 'inject', 'activity': 'walk', 'duration_s': 1.0},\n"
            "  {'t': 1.4, 'op': 'move_to', 'vertex': 'left_elbow'},\n"
            "]\n"
            "sim = Simulator(generalized_layout(), seed=17)\n"
            "print(events_to_log(run_script(sim, script, 3.0)), end='')\n"
        )
        logs = []
        for backend in ("python", ""):
            env = {**os.environ}
            if backend:
                env["RAILBOT_KERNEL"] = backend
            else:
                env.pop("RAILBOT_KERNEL", None)
            out = subprocess.run([sys.executable, "-c", code], env=env,
                                 capture_output=True, text=True, check=True)
            logs.append(out.stdout)
        assert logs[0] == logs[1]
        assert '"HallDetect"' in logs[0]
