"""Motion-kernel backend selection.

The tick-level numeric helpers exist twice: a Cython extension built at
install time and a pure-Python twin. Importing this module picks the
compiled one when present and falls back silently otherwise; the two are
kept operation-for-operation identical, so the choice affects speed only.

Set RAILBOT_KERNEL=python to force the fallback (useful for benchmarking).
"""

import os

if os.environ.get("RAILBOT_KERNEL") == "python":
    from . import _motionkernel_py as _impl
else:
    try:
        from . import _motionkernel as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _motionkernel_py as _impl

BACKEND: str = _impl.BACKEND
integrate_tick = _impl.integrate_tick
body_accel = _impl.body_accel
gforce_norm = _impl.gforce_norm
