"""Compare the compiled motion kernel against the pure-Python fallback.

Times the two hot calls the simulator makes every tick, plus a whole-sim
run under each backend. Run from the repo root:

    python3 benchmarks/bench_kernel.py
"""

import os
import subprocess
import sys
import time
import timeit

from railbot import _motionkernel_py as pykernel

try:
    from railbot import _motionkernel as ckernel
except ImportError:
    ckernel = None


def bench_call(fn, args, number=200_000):
    t = timeit.timeit(lambda: fn(*args), number=number)
    return t / number * 1e9  # ns per call


def bench_kernels():
    cases = [
        ("integrate_tick mid-segment", "integrate_tick", (57.5, 115.0, 115.0, 0.01)),
        ("integrate_tick crossing", "integrate_tick", (114.9, 115.0, 115.0, 0.01)),
        ("body_accel", "body_accel", (35.0, 220.0, -1.0, 0.01, -0.02, 0.005)),
        ("gforce_norm", "gforce_norm", (0.3, -0.6, 0.7)),
    ]
    print(f"{'call':32} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for label, name, args in cases:
        py_ns = bench_call(getattr(pykernel, name), args)
        if ckernel is None:
            print(f"{label:32} {py_ns:10.0f} ns {'-':>12} {'-':>9}")
            continue
        c_ns = bench_call(getattr(ckernel, name), args)
        print(f"{label:32} {py_ns:10.0f} ns {c_ns:10.0f} ns {py_ns / c_ns:8.1f}x")


SIM_CODE = """
from railbot.layout import generalized_layout
from railbot.simcore import Simulator, run_script
from railbot import kernel
script = [
    {"t": 0.0, "op": "place", "vertex": "left_wrist"},
    {"t": 0.0, "op": "stream_imu", "rate_hz": 15, "on": True},
    {"t": 0.1, "op": "move_to", "vertex": "left_forearm"},
    {"t": 1.4, "op": "move_to", "vertex": "left_elbow"},
    {"t": 2.6, "op": "move_to", "vertex": "left_upper_arm"},
    {"t": 4.0, "op": "inject", "activity": "walk", "duration_s": 20.0},
]
import time
t0 = time.perf_counter()
run_script(Simulator(generalized_layout(), seed=1), script, 60.0)
print(kernel.BACKEND, time.perf_counter() - t0)
"""


def bench_whole_sim():
    print("\n60 s simulated run (6000 ticks, 15 Hz IMU):")
    for backend in ("python", None):
        env = {**os.environ}
        if backend:
            env["RAILBOT_KERNEL"] = backend
        else:
            env.pop("RAILBOT_KERNEL", None)
        out = subprocess.run([sys.executable, "-c", SIM_CODE], env=env,
                             capture_output=True, text=True, check=True)
        name, seconds = out.stdout.split()
        print(f"  {name:10} backend: {float(seconds) * 1000:8.1f} ms wall")


if __name__ == "__main__":
    print(f"compiled kernel available: {ckernel is not None}")
    bench_kernels()
    bench_whole_sim()
