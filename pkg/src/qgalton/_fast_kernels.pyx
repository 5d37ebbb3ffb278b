# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled event-stream kernels.

These are the two sequential scans that dominate Monte Carlo runtime: the
non-paralyzable dead-time filter and the greedy trigger/partner pulse pairing.
`qgalton._kernels_py` holds the drop-in pure-Python implementations; the
dispatch in `qgalton.kernels` picks whichever is importable.
"""

import numpy as np

from libc.math cimport fabs

BACKEND = "cython"


def dead_time_filter(long long[::1] pixels, double[::1] times, int n_pixels, double dead_time):
    """Mask of events that register under a non-paralyzable dead time.

    Events must be sorted by time.  An event on pixel p at time t registers
    iff t - (last registered time on p) >= dead_time; blocked events do not
    extend the dead window.
    """
    cdef Py_ssize_t n = times.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    last_arr = np.full(n_pixels, -np.inf, dtype=np.float64)
    cdef unsigned char[::1] keep = out
    cdef double[::1] last = last_arr
    cdef Py_ssize_t i
    cdef long long p
    for i in range(n):
        p = pixels[i]
        if times[i] - last[p] >= dead_time:
            keep[i] = 1
            last[p] = times[i]
    return out.astype(bool)


def pair_pulses(double[::1] trigger_times, double[::1] partner_times, double window):
    """Greedy nearest-in-window pairing of trigger pulses with partners.

    Both inputs must be sorted ascending.  Triggers are processed in time
    order; each takes the unused partner nearest in time within +/- window
    (earliest index on exact ties).  Returns an int64 array of partner
    indices per trigger, -1 where no partner was available.
    """
    cdef Py_ssize_t n_trig = trigger_times.shape[0]
    cdef Py_ssize_t n_part = partner_times.shape[0]
    match_arr = np.full(n_trig, -1, dtype=np.int64)
    used_arr = np.zeros(n_part, dtype=np.uint8)
    cdef long long[::1] match = match_arr
    cdef unsigned char[::1] used = used_arr
    cdef Py_ssize_t i, j, lo = 0
    cdef Py_ssize_t best
    cdef double t, d, best_d
    for i in range(n_trig):
        t = trigger_times[i]
        while lo < n_part and partner_times[lo] < t - window:
            lo += 1
        best = -1
        best_d = window + 1.0
        j = lo
        while j < n_part and partner_times[j] <= t + window:
            if not used[j]:
                d = fabs(partner_times[j] - t)
                if d < best_d:
                    best_d = d
                    best = j
            j += 1
        if best >= 0:
            used[best] = 1
            match[i] = best
    return match_arr
