"""Simulator and controller-side navigation stack for a track-riding
on-body robot.

The package splits along the real system's seams: `layout` and `routing`
describe the track network, `motion` holds the calibrated speed/slip/power
models, `protocol` is the radio wire format, `simcore` the deterministic
plant simulation, `anatloc` the IMU-based localization pipeline, and
`controller`/`scenarios`/`server` the application layer on top.
"""

__version__ = "0.1.0"

from .layout import (  # noqa: F401
    Connector,
    LandmarkVertex,
    LayoutError,
    TrackLayout,
    TrackSegment,
    Turntable,
    generalized_layout,
    parse_layout,
    serialize_layout,
    validate_layout,
)
