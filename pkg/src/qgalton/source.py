"""Weak coherent photon source feeding the coupler mesh.

The physical source is a pulsed laser attenuated far below one photon per
pulse, gated into fixed acquisition windows.  Photon counts per window are
Poisson, arrival times inside a window are uniform, and each photon exits
the mesh in one output bin drawn from the walk distribution.

Coupler transmission depends on wavelength.  Over the band we care about the
dependence is linear to within measurement error, so the model here is a
straight-line fit through calibration points with clamping at the physical
[0, 1] limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    InvalidArgumentError,
    InvalidDistributionError,
    InvalidModelError,
)

# transmission calibration: (wavelength in nm, fitted t^2)
DEFAULT_CALIBRATION = ((1520.0, 0.816), (1550.0, 0.763))


class T2Prediction(NamedTuple):
    """Predicted coupler transmission at one wavelength."""

    t_squared: float
    extrapolated: bool


@dataclass(frozen=True)
class WavelengthModel:
    """Linear map from wavelength to coupler transmission t^2.

    Fit by least squares through two or more calibration points; with
    exactly two points this is the line through them.  Predictions are
    clamped to [0, 1] and flagged when the query lies outside the
    calibrated wavelength range.
    """

    slope: float
    intercept: float
    wavelength_min: float
    wavelength_max: float

    @classmethod
    def fit(cls, points: Sequence[tuple[float, float]] = DEFAULT_CALIBRATION):
        if len(points) < 2:
            raise InvalidModelError(
                "wavelength model needs at least two calibration points, "
                f"got {len(points)}"
            )
        wl = np.asarray([p[0] for p in points], dtype=float)
        t2 = np.asarray([p[1] for p in points], dtype=float)
        if np.unique(wl).size < 2:
            raise InvalidModelError("calibration wavelengths are all identical")
        if np.any(t2 < 0.0) or np.any(t2 > 1.0):
            raise InvalidModelError("calibration t^2 values must lie in [0, 1]")
        slope, intercept = np.polyfit(wl, t2, 1)
        return cls(
            slope=float(slope),
            intercept=float(intercept),
            wavelength_min=float(wl.min()),
            wavelength_max=float(wl.max()),
        )

    def predict(self, wavelength: float) -> T2Prediction:
        if not np.isfinite(wavelength) or wavelength <= 0.0:
            raise InvalidArgumentError(f"wavelength must be positive, got {wavelength}")
        raw = self.slope * wavelength + self.intercept
        clamped = min(1.0, max(0.0, raw))
        outside = wavelength < self.wavelength_min or wavelength > self.wavelength_max
        return T2Prediction(t_squared=clamped, extrapolated=bool(outside))


def t2_of_wavelength(wavelength: float, model: WavelengthModel | None = None) -> float:
    """Shorthand for the default-calibration transmission at `wavelength`."""
    if model is None:
        model = WavelengthModel.fit()
    return model.predict(wavelength).t_squared


@dataclass(frozen=True)
class SourceConfig:
    """Source settings for one acquisition run.

    mean_photon_number is the Poisson mean per window; window is the
    acquisition window length in seconds.
    """

    mean_photon_number: float = 1.0
    window: float = 2e-6
    wavelength: float = 1550.0
    seed: int = 0

    def __post_init__(self):
        if not (self.mean_photon_number >= 0.0 and np.isfinite(self.mean_photon_number)):
            raise InvalidArgumentError(
                f"mean photon number must be finite and >= 0, got {self.mean_photon_number}"
            )
        if not (self.window > 0.0 and np.isfinite(self.window)):
            raise InvalidArgumentError(f"window must be positive, got {self.window}")

    @property
    def mean_interarrival(self) -> float:
        """Expected gap between photons at this rate, window / mean count."""
        if self.mean_photon_number == 0.0:
            return float("inf")
        return self.window / self.mean_photon_number


@dataclass
class PhotonEvents:
    """Photons inside one acquisition window, sorted by arrival time.

    times are seconds relative to the window start; bins is filled by
    assign_bins and holds -1 until then.
    """

    window_index: int
    times: np.ndarray
    bins: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.bins is None:
            self.bins = np.full(self.times.shape, -1, dtype=np.int64)
        else:
            self.bins = np.asarray(self.bins, dtype=np.int64)
        if self.bins.shape != self.times.shape:
            raise InvalidArgumentError("times and bins must have matching length")

    def __len__(self):
        return self.times.size


def window_rng(master_seed: int, window_index: int) -> np.random.Generator:
    """Independent per-window stream from a counter-based generator.

    Keying the generator on (master_seed, window_index) makes every window
    reproducible on its own, so windows can be simulated in any order or in
    parallel without sharing state.
    """
    if window_index < 0:
        raise InvalidArgumentError(f"window index must be >= 0, got {window_index}")
    return np.random.Generator(np.random.Philox(key=[master_seed, window_index]))


def sample_arrivals(config: SourceConfig, rng: np.random.Generator,
                    window_index: int = 0) -> PhotonEvents:
    """Draw one window of photon arrivals.

    The count is Poisson(mean_photon_number) and, conditioned on the count,
    arrival times are independent uniforms over the window.  That is exactly
    a homogeneous Poisson process restricted to the window.
    """
    n = int(rng.poisson(config.mean_photon_number))
    times = np.sort(rng.uniform(0.0, config.window, size=n))
    return PhotonEvents(window_index=window_index, times=times)


def assign_bins(events: PhotonEvents, probabilities: np.ndarray,
                rng: np.random.Generator) -> PhotonEvents:
    """Assign each photon an output bin drawn from the walk distribution.

    Mutates and returns `events`.  The distribution must be normalized to
    within 1e-9; anything worse points at a bug upstream rather than
    rounding error.
    """
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise InvalidDistributionError("probabilities must be a 1-d array")
    if np.any(p < 0.0):
        raise InvalidDistributionError("probabilities must be nonnegative")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise InvalidDistributionError(
            f"probabilities sum to {total!r}, expected 1 within 1e-9"
        )
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    u = rng.random(len(events))
    events.bins = np.searchsorted(cdf, u, side="right").astype(np.int64)
    return events
