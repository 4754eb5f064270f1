"""Pure-Python twin of the compiled motion kernel.

Keep the arithmetic in lock-step with _motionkernel.pyx: same operations in
the same order, so both backends produce bit-identical trajectories and the
backend choice never changes simulation results.
"""

import math

BACKEND = "python"


def integrate_tick(s_mm, length_mm, velocity_mm_s, h_s):
    """Advance one tick along a segment.

    Returns (s_new, cross_fraction): cross_fraction is the fraction of the
    tick at which the position crossed an endpoint (0..1), or -1.0 when no
    boundary was crossed. s_new is clamped to [0, length].
    """
    step = velocity_mm_s * h_s
    s_new = s_mm + step
    if step > 0.0 and s_new >= length_mm:
        if s_mm >= length_mm:
            return length_mm, -1.0
        return length_mm, (length_mm - s_mm) / step
    if step < 0.0 and s_new <= 0.0:
        if s_mm <= 0.0:
            return 0.0, -1.0
        return 0.0, (0.0 - s_mm) / step
    return s_new, -1.0


def body_accel(theta_deg, phi_deg, y_sign, dx, dy, dz):
    """Gravity reaction in the robot frame plus a disturbance vector.

    Returns (ax, ay, az, norm) in g.
    """
    theta = theta_deg * (math.pi / 180.0)
    phi = phi_deg * (math.pi / 180.0)
    ct = math.cos(theta)
    ax = math.sin(theta) + dx
    ay = y_sign * ct * math.sin(phi) + dy
    az = ct * math.cos(phi) + dz
    norm = math.sqrt(ax * ax + ay * ay + az * az)
    return ax, ay, az, norm


def gforce_norm(ax, ay, az):
    return math.sqrt(ax * ax + ay * ay + az * az)
