# cython: language_level=3, boundscheck=False, cdivision=True
"""Compiled motion kernel.

Keep the arithmetic in lock-step with _motionkernel_py.py: same operations
in the same order, so both backends produce bit-identical trajectories and
the backend choice never changes simulation results. C doubles follow IEEE
754 like CPython floats, so matching op order is sufficient.
"""

from libc.math cimport cos, sin, sqrt

BACKEND = "compiled"

cdef double DEG = 3.14159265358979323846 / 180.0


def integrate_tick(double s_mm, double length_mm, double velocity_mm_s, double h_s):
    """Advance one tick along a segment.

    Returns (s_new, cross_fraction): cross_fraction is the fraction of the
    tick at which the position crossed an endpoint (0..1), or -1.0 when no
    boundary was crossed. s_new is clamped to [0, length].
    """
    cdef double step = velocity_mm_s * h_s
    cdef double s_new = s_mm + step
    if step > 0.0 and s_new >= length_mm:
        if s_mm >= length_mm:
            return length_mm, -1.0
        return length_mm, (length_mm - s_mm) / step
    if step < 0.0 and s_new <= 0.0:
        if s_mm <= 0.0:
            return 0.0, -1.0
        return 0.0, (0.0 - s_mm) / step
    return s_new, -1.0


def body_accel(double theta_deg, double phi_deg, double y_sign,
               double dx, double dy, double dz):
    """Gravity reaction in the robot frame plus a disturbance vector.

    Returns (ax, ay, az, norm) in g.
    """
    cdef double theta = theta_deg * DEG
    cdef double phi = phi_deg * DEG
    cdef double ct = cos(theta)
    cdef double ax = sin(theta) + dx
    cdef double ay = y_sign * ct * sin(phi) + dy
    cdef double az = ct * cos(phi) + dz
    cdef double norm = sqrt(ax * ax + ay * ay + az * az)
    return ax, ay, az, norm


def gforce_norm(double ax, double ay, double az):
    return sqrt(ax * ax + ay * ay + az * az)
