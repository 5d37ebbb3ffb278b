"""Backend dispatch for the event-stream kernels.

The compiled extension (`qgalton._fast_kernels`, built from Cython) is used
when importable; otherwise the pure-Python `qgalton._kernels_py` takes over
transparently.  Set QGALTON_KERNELS=python to force the fallback (useful for
benchmarks and debugging), or QGALTON_KERNELS=cython to fail loudly when the
extension is missing.
"""

import os

import numpy as np

__all__ = ["BACKEND", "dead_time_filter", "pair_pulses"]

_requested = os.environ.get("QGALTON_KERNELS", "auto").strip().lower()

if _requested in ("auto", ""):
    try:
        from . import _fast_kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl
elif _requested == "cython":
    from . import _fast_kernels as _impl
elif _requested == "python":
    from . import _kernels_py as _impl
else:
    raise ImportError(
        f"QGALTON_KERNELS={_requested!r} not understood; use 'auto', 'cython' or 'python'"
    )

BACKEND = _impl.BACKEND


def dead_time_filter(pixels, times, n_pixels, dead_time):
    """Boolean mask of time-sorted events surviving a non-paralyzable dead time."""
    pixels = np.ascontiguousarray(pixels, dtype=np.int64)
    times = np.ascontiguousarray(times, dtype=np.float64)
    return _impl.dead_time_filter(pixels, times, int(n_pixels), float(dead_time))


def pair_pulses(trigger_times, partner_times, window):
    """Greedy nearest-in-window partner index per trigger (-1 when unmatched)."""
    trigger_times = np.ascontiguousarray(trigger_times, dtype=np.float64)
    partner_times = np.ascontiguousarray(partner_times, dtype=np.float64)
    return _impl.pair_pulses(trigger_times, partner_times, float(window))
