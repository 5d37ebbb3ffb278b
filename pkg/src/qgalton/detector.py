"""Superconducting nanowire detector array model.

One pixel per mesh output bin.  Each pixel detects an incident photon with a
fixed efficiency, then goes blind for a fixed dead time: while recovering it
ignores further photons and the blocked photons do not extend the recovery
(non-paralyzable response).  Recorded timestamps carry Gaussian jitter, and
each pixel also fires spontaneously at a low dark rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .kernels import dead_time_filter
from .source import PhotonEvents


@dataclass(frozen=True)
class DetectorConfig:
    """Per-pixel detector parameters, times in seconds, rate in Hz."""

    pixel_count: int = 16
    efficiency: float = 1.0
    dead_time: float = 20e-9
    jitter_sigma: float = 50e-12
    dark_count_rate: float = 0.0

    def __post_init__(self):
        if self.pixel_count < 1:
            raise InvalidArgumentError(f"pixel_count must be >= 1, got {self.pixel_count}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidArgumentError(
                f"efficiency must lie in [0, 1], got {self.efficiency}"
            )
        if self.dead_time < 0.0:
            raise InvalidArgumentError(f"dead_time must be >= 0, got {self.dead_time}")
        if self.jitter_sigma < 0.0:
            raise InvalidArgumentError(
                f"jitter_sigma must be >= 0, got {self.jitter_sigma}"
            )
        if self.dark_count_rate < 0.0:
            raise InvalidArgumentError(
                f"dark_count_rate must be >= 0, got {self.dark_count_rate}"
            )


@dataclass
class DetectionRecords:
    """Registered detector clicks, sorted by recorded time.

    pixels and times are parallel arrays; is_dark marks clicks that came
    from dark counts rather than incident photons (available because this
    is a simulation; real hardware cannot tell).
    """

    pixels: np.ndarray
    times: np.ndarray
    is_dark: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=float)
        self.is_dark = np.asarray(self.is_dark, dtype=bool)
        if not (self.pixels.shape == self.times.shape == self.is_dark.shape):
            raise InvalidArgumentError("pixels, times, is_dark must have equal length")

    def __len__(self):
        return self.times.size


def detect(events: PhotonEvents, config: DetectorConfig,
           rng: np.random.Generator, duration: float | None = None) -> DetectionRecords:
    """Run one window of photons through the detector array.

    `duration` bounds the dark-count sampling interval [0, duration); it is
    required whenever dark_count_rate > 0.  Incident photons must already
    carry bin assignments, which map one-to-one onto pixels.
    """
    times = np.asarray(events.times, dtype=float)
    bins = np.asarray(events.bins, dtype=np.int64)
    if times.size and np.any(np.diff(times) < 0):
        raise InvalidArgumentError("photon times must be sorted")
    if np.any(bins < 0) or np.any(bins >= config.pixel_count):
        raise InvalidArgumentError(
            "photon bins must be assigned and lie in "
            f"[0, {config.pixel_count}); run bin assignment first"
        )

    # efficiency thinning: each photon independently survives with prob eta
    if config.efficiency < 1.0:
        keep = rng.random(times.size) < config.efficiency
        times, bins = times[keep], bins[keep]
    is_dark = np.zeros(times.size, dtype=bool)

    if config.dark_count_rate > 0.0:
        if duration is None:
            raise InvalidArgumentError(
                "duration is required when dark_count_rate > 0"
            )
        mean_darks = config.dark_count_rate * duration * config.pixel_count
        n_dark = int(rng.poisson(mean_darks))
        dark_times = rng.uniform(0.0, duration, size=n_dark)
        dark_pixels = rng.integers(0, config.pixel_count, size=n_dark)
        times = np.concatenate([times, dark_times])
        bins = np.concatenate([bins, dark_pixels])
        is_dark = np.concatenate([is_dark, np.ones(n_dark, dtype=bool)])

    order = np.argsort(times, kind="stable")
    times, bins, is_dark = times[order], bins[order], is_dark[order]

    if config.dead_time > 0.0 and times.size:
        alive = dead_time_filter(bins, times, config.pixel_count, config.dead_time)
        times, bins, is_dark = times[alive], bins[alive], is_dark[alive]

    if config.jitter_sigma > 0.0 and times.size:
        times = times + rng.normal(0.0, config.jitter_sigma, size=times.size)
        order = np.argsort(times, kind="stable")
        times, bins, is_dark = times[order], bins[order], is_dark[order]

    return DetectionRecords(pixels=bins, times=times, is_dark=is_dark)


def count_in_window(records: DetectionRecords, start: float | None = None,
                    stop: float | None = None) -> int:
    """Number of clicks with start <= time < stop (whole record by default)."""
    if start is None and stop is None:
        return len(records)
    t = records.times
    mask = np.ones(t.size, dtype=bool)
    if start is not None:
        mask &= t >= start
    if stop is not None:
        mask &= t < stop
    return int(mask.sum())


def counts_per_pixel(records: DetectionRecords, pixel_count: int) -> np.ndarray:
    """Histogram of clicks over pixels, length pixel_count."""
    if len(records) and (records.pixels.min() < 0 or records.pixels.max() >= pixel_count):
        raise InvalidArgumentError("record pixels outside [0, pixel_count)")
    return np.bincount(records.pixels, minlength=pixel_count).astype(np.int64)
