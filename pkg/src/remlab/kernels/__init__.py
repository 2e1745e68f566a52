"""Hot loops: event-driven simulation and canonical-path congestion.

The compiled extension is used when it imports; otherwise the pure-Python
reference implementation is used.  Set ``REMLAB_BACKEND=python`` to force the
fallback.  ``BACKEND`` names the active implementation.
"""
import os

from . import _pykernels as python_backend
from ._pykernels import EXPLORATION, FLAG_TOP, FLAG_TOP_ALONE, METROPOLIS

try:
    from . import _ckernels as compiled_backend
except ImportError:  # pragma: no cover - depends on the build
    compiled_backend = None

_NAMES = (
    "simulate_path",
    "window_batch",
    "blocked_clock_batch",
    "time_change_batch",
    "hitting_batch",
    "canonical_path",
    "path_congestion",
    "f_value",
)


def _select():
    want = os.environ.get("REMLAB_BACKEND", "auto").lower()
    if want == "python" or compiled_backend is None:
        return "python", python_backend
    return "compiled", compiled_backend


BACKEND, _impl = _select()

simulate_path = _impl.simulate_path
window_batch = _impl.window_batch
blocked_clock_batch = _impl.blocked_clock_batch
time_change_batch = _impl.time_change_batch
hitting_batch = _impl.hitting_batch
canonical_path = _impl.canonical_path
path_congestion = _impl.path_congestion
f_value = _impl.f_value

__all__ = ["BACKEND", "METROPOLIS", "EXPLORATION", "FLAG_TOP", "FLAG_TOP_ALONE", *_NAMES]
