"""Delay-line multiplexed readout.

All pixels share one output line.  A click on pixel p produces two pulses
of opposite polarity that travel to the ends of a tapped delay line: the
trigger-polarity pulse leaves after p segment delays, the counter pulse
after (P-1-p), each attenuated per segment traversed.  The pulse-pair
spacing therefore encodes the pixel,

    t_counter - t_trigger = (P - 1 - 2 p) * segment_delay,

a distinct odd multiple of the segment delay per pixel, stepping by twice
the segment delay between neighbours.  The pair midpoint sits half the
line span after the click, so the click time is recovered from the pair
without knowing the pixel first.

Decoding scans each expected spacing separately (nearest-match pairing at
a tight tolerance), which keeps accidental cross-pairings between clicks
that overlap on the line to coincidences at the tolerance scale instead
of coincidences at the line-span scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .detector import DetectionRecords
from .errors import InvalidArgumentError
from .kernels import pair_pulses

FLAG_OK = 0
FLAG_ORPHAN_NEGATIVE = 1
FLAG_ORPHAN_POSITIVE = 2
FLAG_PIXEL_OUT_OF_RANGE = 3
FLAG_NAMES = ("ok", "orphan_negative", "orphan_positive", "pixel_out_of_range")

# pairing tolerance: pulse pairs from one click have spacing set by passive
# line lengths, so the residual budget only covers arithmetic noise
DEFAULT_TOLERANCE = 10e-12


@dataclass(frozen=True)
class LineConfig:
    """Delay-line geometry and pulse shaping.

    segment_delay is the per-tap delay in seconds; attenuation_per_segment
    multiplies the amplitude once per segment traversed.  trigger_polarity
    names the polarity of the pulse that leaves through the near end.
    """

    segment_delay: float = 0.9e-9
    pixel_count: int = 16
    attenuation_per_segment: float = 0.97
    base_amplitude: float = 1.0
    trigger_polarity: str = "negative"

    def __post_init__(self):
        if not self.segment_delay > 0.0:
            raise InvalidArgumentError(
                f"segment_delay must be positive, got {self.segment_delay}"
            )
        if self.pixel_count < 1:
            raise InvalidArgumentError(
                f"pixel_count must be >= 1, got {self.pixel_count}"
            )
        if not 0.0 < self.attenuation_per_segment <= 1.0:
            raise InvalidArgumentError(
                "attenuation_per_segment must lie in (0, 1], got "
                f"{self.attenuation_per_segment}"
            )
        if not self.base_amplitude > 0.0:
            raise InvalidArgumentError(
                f"base_amplitude must be positive, got {self.base_amplitude}"
            )
        if self.trigger_polarity not in ("negative", "positive"):
            raise InvalidArgumentError(
                f"trigger_polarity must be negative or positive, got "
                f"{self.trigger_polarity!r}"
            )

    @property
    def span(self) -> float:
        """End-to-end line delay, (pixel_count - 1) segments."""
        return (self.pixel_count - 1) * self.segment_delay

    def slot_delay(self, pixel) -> np.ndarray | float:
        """Expected counter-minus-trigger spacing for a pixel index."""
        return (self.pixel_count - 1 - 2 * np.asarray(pixel)) * self.segment_delay


@dataclass
class TraceEvents:
    """Pulses on the readout line, sorted by time.

    amplitudes are signed (polarity is the sign).  origin_ids track which
    detector click produced each pulse, -1 when unknown; real hardware has
    no such channel, it exists for validation.
    """

    times: np.ndarray
    amplitudes: np.ndarray
    origin_ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.origin_ids is None:
            self.origin_ids = np.full(self.times.shape, -1, dtype=np.int64)
        else:
            self.origin_ids = np.asarray(self.origin_ids, dtype=np.int64)
        if not (self.times.shape == self.amplitudes.shape == self.origin_ids.shape):
            raise InvalidArgumentError("trace arrays must have equal length")

    def __len__(self):
        return self.times.size


@dataclass
class DecodedEvents:
    """Decoder output, one row per pulse pair or orphan pulse.

    pixels is -1 for orphans and carries the (possibly illegal) slot index
    for pairs; origin_times is nan for orphans; flags holds FLAG_* codes;
    trigger_index / partner_index point into the decoded trace, -1 where
    that pulse is absent.
    """

    pixels: np.ndarray
    origin_times: np.ndarray
    flags: np.ndarray
    trigger_index: np.ndarray
    partner_index: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.int64)
        self.origin_times = np.asarray(self.origin_times, dtype=float)
        self.flags = np.asarray(self.flags, dtype=np.int8)
        self.trigger_index = np.asarray(self.trigger_index, dtype=np.int64)
        self.partner_index = np.asarray(self.partner_index, dtype=np.int64)

    def __len__(self):
        return self.pixels.size

    @property
    def ok(self) -> np.ndarray:
        return self.flags == FLAG_OK

    def flag_names(self) -> list[str]:
        return [FLAG_NAMES[f] for f in self.flags]


def encode(records: DetectionRecords, config: LineConfig) -> TraceEvents:
    """Turn detector clicks into the pulse train on the shared line."""
    pixels = np.asarray(records.pixels, dtype=np.int64)
    times = np.asarray(records.times, dtype=float)
    if np.any(pixels < 0) or np.any(pixels >= config.pixel_count):
        raise InvalidArgumentError(
            f"record pixels must lie in [0, {config.pixel_count})"
        )
    delta = config.segment_delay
    alpha = config.attenuation_per_segment
    last = config.pixel_count - 1
    sign = -1.0 if config.trigger_polarity == "negative" else 1.0

    trig_times = times + pixels * delta
    trig_amps = sign * config.base_amplitude * alpha**pixels
    ctr_times = times + (last - pixels) * delta
    ctr_amps = -sign * config.base_amplitude * alpha ** (last - pixels)

    ids = np.arange(times.size, dtype=np.int64)
    all_times = np.concatenate([trig_times, ctr_times])
    all_amps = np.concatenate([trig_amps, ctr_amps])
    all_ids = np.concatenate([ids, ids])
    order = np.argsort(all_times, kind="stable")
    return TraceEvents(all_times[order], all_amps[order], all_ids[order])


def _trigger_sign(config: LineConfig) -> float:
    return -1.0 if config.trigger_polarity == "negative" else 1.0


def decode(trace: TraceEvents, config: LineConfig,
           tolerance: float = DEFAULT_TOLERANCE,
           slot_pad: int = 2) -> DecodedEvents:
    """Recover clicks (pixel, time) from the pulse train.

    Pairing runs one pass per candidate pixel slot: trigger pulses shifted
    by that slot's expected spacing are matched to the nearest unused
    counter pulse within `tolerance`.  Legal slots are scanned first, then
    `slot_pad` slots beyond each end of the line; a pair landing there is
    structurally valid but names no physical pixel, so it is flagged
    pixel_out_of_range.  Unmatched pulses come back as orphans.
    """
    if tolerance <= 0.0:
        raise InvalidArgumentError(f"tolerance must be positive, got {tolerance}")
    if 2.0 * tolerance >= config.segment_delay:
        raise InvalidArgumentError(
            "tolerance must be well under half a segment delay to separate "
            "neighbouring slots"
        )
    amps = trace.amplitudes
    if np.any(amps == 0.0):
        raise InvalidArgumentError("trace contains zero-amplitude pulses")

    order = np.argsort(trace.times, kind="stable")
    times = trace.times[order]

    sign = _trigger_sign(config)
    is_trig = np.sign(amps[order]) == sign
    trig_pos_in_trace = order[is_trig]
    part_pos_in_trace = order[~is_trig]
    trig_times = times[is_trig]
    part_times = times[~is_trig]

    trig_flag = FLAG_ORPHAN_NEGATIVE if sign < 0 else FLAG_ORPHAN_POSITIVE
    part_flag = FLAG_ORPHAN_POSITIVE if sign < 0 else FLAG_ORPHAN_NEGATIVE

    n_pix = config.pixel_count
    slots = list(range(n_pix))
    for k in range(1, slot_pad + 1):
        slots.append(-k)
        slots.append(n_pix - 1 + k)

    trig_pool = np.arange(trig_times.size, dtype=np.int64)
    part_pool = np.arange(part_times.size, dtype=np.int64)

    pair_trig: list[np.ndarray] = []
    pair_part: list[np.ndarray] = []
    pair_slot: list[np.ndarray] = []
    for slot in slots:
        if trig_pool.size == 0 or part_pool.size == 0:
            break
        offset = float(config.slot_delay(slot))
        match = pair_pulses(trig_times[trig_pool] + offset,
                            part_times[part_pool], tolerance)
        hit = match >= 0
        if hit.any():
            pair_trig.append(trig_pool[hit])
            pair_part.append(part_pool[match[hit]])
            pair_slot.append(np.full(int(hit.sum()), slot, dtype=np.int64))
            trig_pool = trig_pool[~hit]
            used = np.zeros(part_pool.size, dtype=bool)
            used[match[hit]] = True
            part_pool = part_pool[~used]

    if pair_trig:
        p_trig = np.concatenate(pair_trig)
        p_part = np.concatenate(pair_part)
        p_slot = np.concatenate(pair_slot)
    else:
        p_trig = np.empty(0, dtype=np.int64)
        p_part = np.empty(0, dtype=np.int64)
        p_slot = np.empty(0, dtype=np.int64)

    half_span = 0.5 * config.span
    pair_origin = 0.5 * (trig_times[p_trig] + part_times[p_part]) - half_span
    pair_flags = np.where((p_slot >= 0) & (p_slot < n_pix),
                          FLAG_OK, FLAG_PIXEL_OUT_OF_RANGE).astype(np.int8)

    rows_pixel = [p_slot]
    rows_time = [pair_origin]
    rows_flag = [pair_flags]
    rows_trig = [trig_pos_in_trace[p_trig]]
    rows_part = [part_pos_in_trace[p_part]]
    rows_sort = [pair_origin]

    if trig_pool.size:
        rows_pixel.append(np.full(trig_pool.size, -1, dtype=np.int64))
        rows_time.append(np.full(trig_pool.size, np.nan))
        rows_flag.append(np.full(trig_pool.size, trig_flag, dtype=np.int8))
        rows_trig.append(trig_pos_in_trace[trig_pool])
        rows_part.append(np.full(trig_pool.size, -1, dtype=np.int64))
        rows_sort.append(trig_times[trig_pool])
    if part_pool.size:
        rows_pixel.append(np.full(part_pool.size, -1, dtype=np.int64))
        rows_time.append(np.full(part_pool.size, np.nan))
        rows_flag.append(np.full(part_pool.size, part_flag, dtype=np.int8))
        rows_trig.append(np.full(part_pool.size, -1, dtype=np.int64))
        rows_part.append(part_pos_in_trace[part_pool])
        rows_sort.append(part_times[part_pool])

    sort_key = np.concatenate(rows_sort)
    order = np.argsort(sort_key, kind="stable")
    return DecodedEvents(
        pixels=np.concatenate(rows_pixel)[order],
        origin_times=np.concatenate(rows_time)[order],
        flags=np.concatenate(rows_flag)[order],
        trigger_index=np.concatenate(rows_trig)[order],
        partner_index=np.concatenate(rows_part)[order],
    )


@dataclass(frozen=True)
class PersistencePeak:
    """One cluster on the persistence display."""

    delay: float
    amplitude: float
    count: int
    weight: float


@dataclass
class PersistenceResult:
    """Trigger-aligned overlay of counter pulses.

    bin_edges / bin_counts give the delay histogram over the sweep span;
    mean_amplitudes is per delay bin (nan where empty); peaks lists the
    clusters that survived the occupancy threshold, sorted by delay.
    """

    bin_edges: np.ndarray
    bin_counts: np.ndarray
    mean_amplitudes: np.ndarray
    peaks: list[PersistencePeak]
    n_triggers: int
    n_overlaid: int


def persistence_trace(trace: TraceEvents, config: LineConfig,
                      bin_width: float = 0.1e-9,
                      min_cluster: Optional[int] = None) -> PersistenceResult:
    """Build a persistence view by overlaying sweeps around every trigger.

    Every trigger-polarity pulse starts a sweep; all counter-polarity
    pulses within the line span (plus one slot of margin) are overlaid at
    their delay from the trigger.  True pairs pile up at the slot delays
    while unrelated clicks leave a thin haze, so clusters below
    min_cluster members (default max(5, 0.1% of sweeps)) are discarded.
    """
    if bin_width <= 0.0:
        raise InvalidArgumentError(f"bin_width must be positive, got {bin_width}")
    sign = _trigger_sign(config)
    amps = trace.amplitudes
    if np.any(amps == 0.0):
        raise InvalidArgumentError("trace contains zero-amplitude pulses")

    order = np.argsort(trace.times, kind="stable")
    times = trace.times[order]
    s_amps = amps[order]
    is_trig = np.sign(s_amps) == sign
    trig_times = times[is_trig]
    part_times = times[~is_trig]
    part_amps = s_amps[~is_trig]

    reach = config.span + 2.0 * config.segment_delay
    n_trig = trig_times.size
    if min_cluster is None:
        min_cluster = max(5, int(round(1e-3 * n_trig)))

    lo = np.searchsorted(part_times, trig_times - reach, side="left")
    hi = np.searchsorted(part_times, trig_times + reach, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total:
        # flat indices of every (trigger, counter) overlay pair
        starts = np.repeat(lo, counts)
        within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        part_idx = starts + within
        delays = part_times[part_idx] - np.repeat(trig_times, counts)
        amplitudes = part_amps[part_idx]
    else:
        delays = np.empty(0)
        amplitudes = np.empty(0)

    edges = np.arange(-reach, reach + bin_width, bin_width)
    bin_counts, _ = np.histogram(delays, bins=edges)
    amp_sums, _ = np.histogram(delays, bins=edges, weights=amplitudes)
    with np.errstate(invalid="ignore"):
        mean_amps = np.where(bin_counts > 0, amp_sums / np.maximum(bin_counts, 1),
                             np.nan)

    peaks: list[PersistencePeak] = []
    if delays.size:
        srt = np.argsort(delays, kind="stable")
        d = delays[srt]
        a = amplitudes[srt]
        breaks = np.nonzero(np.diff(d) > bin_width)[0] + 1
        for seg_d, seg_a in zip(np.split(d, breaks), np.split(a, breaks)):
            if seg_d.size >= min_cluster:
                # weight against sweep count: each sweep holds exactly one
                # true partner, so this estimates the pixel probability
                peaks.append(PersistencePeak(
                    delay=float(np.median(seg_d)),
                    amplitude=float(np.median(seg_a)),
                    count=int(seg_d.size),
                    weight=float(seg_d.size) / float(max(n_trig, 1)),
                ))
    peaks.sort(key=lambda p: p.delay)
    return PersistenceResult(
        bin_edges=edges,
        bin_counts=bin_counts,
        mean_amplitudes=mean_amps,
        peaks=peaks,
        n_triggers=n_trig,
        n_overlaid=total,
    )
