"""Estimators and goodness-of-fit checks for decoded event streams.

Three fits share one recipe: least squares between an observed histogram
and the model's bin masses for the headline estimate, the analytic MLE
alongside where one exists, and a bootstrap percentile interval.  The
bootstrap refits run as one vectorized golden-section minimization over
all resamples at once rather than a Python loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize, stats as sps

from .errors import (
    DegenerateFitError,
    InvalidArgumentError,
    InvalidDistributionError,
)
from .walk import bin_probabilities

DEFAULT_BOOTSTRAP = 500
_CI_LEVEL = 0.95


@dataclass
class BinHistogram:
    """Counts over the mesh output bins."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or self.counts.size < 2:
            raise InvalidArgumentError("histogram needs at least two bins")
        if np.any(self.counts < 0):
            raise InvalidArgumentError("histogram counts must be nonnegative")

    @classmethod
    def from_pixels(cls, pixels, n_bins: int) -> "BinHistogram":
        pixels = np.asarray(pixels, dtype=np.int64)
        if pixels.size and (pixels.min() < 0 or pixels.max() >= n_bins):
            raise InvalidArgumentError(f"pixels must lie in [0, {n_bins})")
        return cls(np.bincount(pixels, minlength=n_bins))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        if self.total == 0:
            raise DegenerateFitError("empty histogram has no frequencies")
        return self.counts / self.total


@dataclass(frozen=True)
class FitResult:
    """One estimate with its bootstrap percentile interval.

    residual is the least-squares objective at the estimate; mle is the
    analytic maximum-likelihood value when one exists for the model.
    """

    estimate: float
    ci_low: float
    ci_high: float
    residual: float
    method: str
    n_samples: int
    n_bootstrap: int
    seed: int
    mle: Optional[float] = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "residual": self.residual,
            "method": self.method,
            "n_samples": self.n_samples,
            "n_bootstrap": self.n_bootstrap,
            "seed": self.seed,
            "mle": self.mle,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class GofResult:
    """Pearson chi-square against a fitted or fixed model."""

    statistic: float
    dof: int
    p_value: float
    n_pooled: int

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "n_pooled": self.n_pooled,
        }


@dataclass(frozen=True)
class ConsistencyReport:
    """Cross-check of the per-window mean against interval timing.

    implied_mean is window / tau: the mean count the fitted inter-arrival
    time implies for one window.  ci_overlap reports whether the two 95
    percent intervals intersect.
    """

    count_mean: float
    count_ci: tuple[float, float]
    interval_mean: float
    interval_ci: tuple[float, float]
    window: float
    implied_mean: float
    implied_ci: tuple[float, float]
    ratio: float
    ci_overlap: bool

    def to_dict(self) -> dict:
        return {
            "count_mean": self.count_mean,
            "count_ci": list(self.count_ci),
            "interval_mean": self.interval_mean,
            "interval_ci": list(self.interval_ci),
            "window": self.window,
            "implied_mean": self.implied_mean,
            "implied_ci": list(self.implied_ci),
            "ratio": self.ratio,
            "ci_overlap": self.ci_overlap,
        }


def _golden_minimize(objective: Callable[[np.ndarray], np.ndarray],
                     lo: np.ndarray, hi: np.ndarray,
                     iterations: int = 48) -> np.ndarray:
    """Golden-section minimum per row of a vectorized objective.

    objective maps an array of candidate points (one per row) to objective
    values of the same shape.  48 iterations shrink the bracket by about
    1e-10 of its width, well past the precision any of these fits needs.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a = np.asarray(lo, dtype=float).copy()
    b = np.asarray(hi, dtype=float).copy()
    for _ in range(iterations):
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        keep_left = objective(x1) < objective(x2)
        b = np.where(keep_left, x2, b)
        a = np.where(keep_left, a, x1)
    return 0.5 * (a + b)


def _percentile_ci(samples: np.ndarray) -> tuple[float, float]:
    tail = 100.0 * (1.0 - _CI_LEVEL) / 2.0
    return (float(np.percentile(samples, tail)),
            float(np.percentile(samples, 100.0 - tail)))


def _grid_degeneracy(objective_on_grid: np.ndarray) -> None:
    """Reject objectives whose only minima are the two bracket ends."""
    obj = np.asarray(objective_on_grid)
    m = obj.min()
    at_min = np.isclose(obj, m, rtol=0.0, atol=1e-12 * max(1.0, float(obj.max())))
    if at_min[0] and at_min[-1] and not at_min[1:-1].any():
        raise DegenerateFitError(
            "objective is minimized only at both parameter bounds; the data "
            "do not identify the parameter"
        )


def fit_t2(histogram, n_bootstrap: int = DEFAULT_BOOTSTRAP, seed: int = 0,
           input_port: str = "left") -> FitResult:
    """Least-squares coupler transmission from a bin histogram.

    The model is the walk distribution over 2*stages bins as a function of
    t^2; the objective is the summed squared difference between observed
    bin frequencies and model probabilities.  The interval comes from a
    parametric bootstrap: multinomial resamples at the fitted model,
    refitted by vectorized golden section.
    """
    if isinstance(histogram, BinHistogram):
        counts = histogram.counts
    else:
        counts = np.asarray(histogram, dtype=np.int64)
    if counts.ndim != 1 or counts.size < 2 or counts.size % 2:
        raise InvalidArgumentError(
            "histogram length must be 2 * stages, got shape "
            f"{counts.shape}"
        )
    if np.any(counts < 0):
        raise InvalidArgumentError("histogram counts must be nonnegative")
    total = int(counts.sum())
    if total == 0:
        raise DegenerateFitError("cannot fit transmission to an empty histogram")
    stages = counts.size // 2
    freq = counts / total

    def objective_rows(t2_rows: np.ndarray) -> np.ndarray:
        model = bin_probabilities(stages, t2_rows, input_port)
        return ((freq[None, :] - model) ** 2).sum(axis=1)

    # the objective oscillates in t^2 (the model is a degree-2*stages
    # polynomial family), so every minimization below starts from a grid
    # scan to land in the right basin before local refinement
    grid = np.linspace(0.0, 1.0, 513)
    model_grid = bin_probabilities(stages, grid, input_port)

    def refine_brackets(freq_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        objs = ((freq_rows**2).sum(axis=1)[:, None]
                - 2.0 * freq_rows @ model_grid.T
                + (model_grid**2).sum(axis=1)[None, :])
        at = objs.argmin(axis=1)
        return grid[np.maximum(at - 1, 0)], grid[np.minimum(at + 1, grid.size - 1)]

    grid_obj = objective_rows(grid)
    _grid_degeneracy(grid_obj)
    flags: list[str] = []
    if float(grid_obj.max() - grid_obj.min()) < 1e-15:
        estimate = 0.5
        flags.append("flat-objective")
    else:
        k = int(np.argmin(grid_obj))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, grid.size - 1)]
        estimate = float(optimize.fminbound(
            lambda x: float(objective_rows(np.array([x]))[0]),
            lo, hi, xtol=1e-8))
    residual = float(objective_rows(np.array([estimate]))[0])

    # multinomial MLE of t^2 on the same model, for reference
    with np.errstate(divide="ignore", invalid="ignore"):
        log_model = np.where(model_grid > 0.0, np.log(model_grid), -np.inf)
        nll_grid = -(log_model * counts[None, :]).sum(axis=1)
    nll_grid = np.where(np.isfinite(nll_grid), nll_grid, np.inf)
    k = int(np.argmin(nll_grid))

    def nll(x: float) -> float:
        p = bin_probabilities(stages, np.array([x]), input_port)[0]
        mask = counts > 0
        if np.any(p[mask] <= 0.0):
            return np.inf
        return -float(np.dot(counts[mask], np.log(p[mask])))

    mle = float(optimize.fminbound(
        nll, grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)], xtol=1e-8))

    rng = np.random.default_rng(seed)
    model_p = bin_probabilities(stages, np.array([estimate]), input_port)[0]
    resamples = rng.multinomial(total, model_p, size=n_bootstrap) / total

    def boot_objective(t2_rows: np.ndarray) -> np.ndarray:
        model = bin_probabilities(stages, t2_rows, input_port)
        return ((resamples - model) ** 2).sum(axis=1)

    boot_lo, boot_hi = refine_brackets(resamples)
    boot = _golden_minimize(boot_objective, boot_lo, boot_hi)
    ci_low, ci_high = _percentile_ci(boot)
    return FitResult(
        estimate=estimate, ci_low=ci_low, ci_high=ci_high, residual=residual,
        method="least-squares", n_samples=total, n_bootstrap=n_bootstrap,
        seed=seed, mle=mle, flags=tuple(flags),
    )


def _poisson_pmf_matrix(lam_rows: np.ndarray, kmax: int) -> np.ndarray:
    """pmf over k = 0..kmax per row plus a tail-mass column."""
    k = np.arange(kmax + 1)
    pmf = sps.poisson.pmf(k[None, :], lam_rows[:, None])
    tail = sps.poisson.sf(kmax, lam_rows)[:, None]
    return np.concatenate([pmf, tail], axis=1)


def fit_poisson(window_counts, n_bootstrap: int = DEFAULT_BOOTSTRAP,
                seed: int = 0) -> FitResult:
    """Least-squares Poisson mean from per-window counts.

    The observed count histogram (with an implicit empty tail category
    above the largest count) is matched against the Poisson pmf.  The MLE
    is the sample mean.  The interval is a nonparametric bootstrap over
    windows, done as multinomial resampling of the count histogram.
    """
    counts = np.asarray(window_counts, dtype=np.int64)
    if counts.ndim != 1 or counts.size < 2:
        raise InvalidArgumentError("need counts from at least two windows")
    if np.any(counts < 0):
        raise InvalidArgumentError("window counts must be nonnegative")
    n_windows = counts.size
    kmax = int(counts.max())

    if kmax == 0:
        # nothing ever arrived; the rate is bounded by the rule of three
        return FitResult(
            estimate=0.0, ci_low=0.0, ci_high=3.0 / n_windows, residual=0.0,
            method="least-squares", n_samples=n_windows,
            n_bootstrap=n_bootstrap, seed=seed, mle=0.0, flags=("all-zero",),
        )

    hist = np.bincount(counts, minlength=kmax + 1)
    freq = np.concatenate([hist / n_windows, [0.0]])  # tail is empty by design
    bracket_hi = float(kmax + 1)

    def objective_rows(lam_rows: np.ndarray) -> np.ndarray:
        model = _poisson_pmf_matrix(lam_rows, kmax)
        return ((freq[None, :] - model) ** 2).sum(axis=1)

    estimate = float(optimize.fminbound(
        lambda x: float(objective_rows(np.array([x]))[0]),
        0.0, bracket_hi, xtol=1e-8))
    residual = float(objective_rows(np.array([estimate]))[0])
    mle = float(counts.mean())

    rng = np.random.default_rng(seed)
    resamples = rng.multinomial(n_windows, freq[:-1] / freq[:-1].sum(),
                                size=n_bootstrap) / n_windows
    resamples = np.concatenate(
        [resamples, np.zeros((n_bootstrap, 1))], axis=1)

    def boot_objective(lam_rows: np.ndarray) -> np.ndarray:
        model = _poisson_pmf_matrix(lam_rows, kmax)
        return ((resamples - model) ** 2).sum(axis=1)

    boot = _golden_minimize(boot_objective,
                            np.zeros(n_bootstrap),
                            np.full(n_bootstrap, bracket_hi))
    ci_low, ci_high = _percentile_ci(boot)
    return FitResult(
        estimate=estimate, ci_low=ci_low, ci_high=ci_high, residual=residual,
        method="least-squares", n_samples=n_windows, n_bootstrap=n_bootstrap,
        seed=seed, mle=mle, flags=(),
    )


def _exp_mass_matrix(tau_rows: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Exponential bin masses per row plus the open tail column."""
    z = np.exp(-edges[None, :] / tau_rows[:, None])
    return np.concatenate([z[:, :-1] - z[:, 1:], z[:, -1:]], axis=1)


def fit_exponential(intervals, n_bootstrap: int = DEFAULT_BOOTSTRAP,
                    seed: int = 0) -> FitResult:
    """Least-squares exponential mean from inter-arrival gaps.

    Gaps are binned at a tenth of their sample mean out to five means,
    with one open tail bin; bin masses are matched against the exponential
    model.  The MLE is the sample mean.  Bootstrap resamples reuse the
    original bin edges, which pins the multinomial equivalence.
    """
    gaps = np.asarray(intervals, dtype=float)
    if gaps.ndim != 1 or gaps.size < 2:
        raise DegenerateFitError("need at least two inter-arrival gaps to fit")
    if np.any(gaps < 0.0) or not np.all(np.isfinite(gaps)):
        raise InvalidArgumentError("gaps must be finite and nonnegative")
    n = gaps.size
    mean_gap = float(gaps.mean())
    if mean_gap <= 0.0:
        raise DegenerateFitError("all gaps are zero; no timescale to fit")

    edges = np.linspace(0.0, 5.0 * mean_gap, 51)
    hist, _ = np.histogram(gaps, bins=edges)
    tail = n - hist.sum()
    freq = np.concatenate([hist, [tail]]) / n
    lo, hi = mean_gap / 20.0, mean_gap * 20.0

    def objective_rows(tau_rows: np.ndarray) -> np.ndarray:
        model = _exp_mass_matrix(tau_rows, edges)
        return ((freq[None, :] - model) ** 2).sum(axis=1)

    estimate = float(optimize.fminbound(
        lambda x: float(objective_rows(np.array([x]))[0]), lo, hi,
        xtol=1e-8 * mean_gap))  # relative tolerance keeps the fit scale-free
    residual = float(objective_rows(np.array([estimate]))[0])

    rng = np.random.default_rng(seed)
    resamples = rng.multinomial(n, freq, size=n_bootstrap) / n

    def boot_objective(tau_rows: np.ndarray) -> np.ndarray:
        model = _exp_mass_matrix(tau_rows, edges)
        return ((resamples - model) ** 2).sum(axis=1)

    boot = _golden_minimize(boot_objective,
                            np.full(n_bootstrap, lo), np.full(n_bootstrap, hi))
    ci_low, ci_high = _percentile_ci(boot)
    return FitResult(
        estimate=estimate, ci_low=ci_low, ci_high=ci_high, residual=residual,
        method="least-squares", n_samples=n, n_bootstrap=n_bootstrap,
        seed=seed, mle=mean_gap, flags=(),
    )


def mean_consistency(count_fit: FitResult, interval_fit: FitResult,
                     window: float) -> ConsistencyReport:
    """Check that per-window counts and gap timing tell one story.

    A Poisson stream at mean gap tau fills a window of length W with
    W / tau arrivals on average, so the two fits must agree up to their
    uncertainties.  The implied interval maps the gap interval through
    x -> W / x (monotone decreasing, so the endpoints swap).
    """
    if window <= 0.0:
        raise InvalidArgumentError(f"window must be positive, got {window}")
    if interval_fit.estimate <= 0.0:
        raise InvalidArgumentError("interval fit must have a positive mean")
    implied = window / interval_fit.estimate
    imp_lo = window / interval_fit.ci_high if interval_fit.ci_high > 0 else np.inf
    imp_hi = window / interval_fit.ci_low if interval_fit.ci_low > 0 else np.inf
    overlap = (count_fit.ci_low <= imp_hi) and (imp_lo <= count_fit.ci_high)
    return ConsistencyReport(
        count_mean=count_fit.estimate,
        count_ci=(count_fit.ci_low, count_fit.ci_high),
        interval_mean=interval_fit.estimate,
        interval_ci=(interval_fit.ci_low, interval_fit.ci_high),
        window=window,
        implied_mean=implied,
        implied_ci=(imp_lo, imp_hi),
        ratio=count_fit.estimate / implied,
        ci_overlap=bool(overlap),
    )


def chi_square_gof(observed, expected_probs, n_fitted: int = 0,
                   min_expected: float = 5.0) -> GofResult:
    """Pearson chi-square with small-expectation pooling.

    Categories are pooled left to right until each pooled cell expects at
    least min_expected counts; a trailing remainder folds into the last
    cell.  When the model mass does not reach one, the deficit becomes an
    extra category with zero observed counts.  dof is cells - 1 - n_fitted.
    """
    obs = np.asarray(observed, dtype=np.int64)
    probs = np.asarray(expected_probs, dtype=float)
    if obs.ndim != 1 or probs.ndim != 1 or obs.size != probs.size:
        raise InvalidArgumentError("observed and expected_probs must match in length")
    if np.any(obs < 0):
        raise InvalidArgumentError("observed counts must be nonnegative")
    if np.any(probs < 0.0):
        raise InvalidDistributionError("expected probabilities must be nonnegative")
    mass = probs.sum()
    if mass > 1.0 + 1e-9:
        raise InvalidDistributionError(f"expected probabilities sum to {mass} > 1")
    total = int(obs.sum())
    if total == 0:
        raise InvalidArgumentError("no observed counts to test")

    if mass < 1.0 - 1e-12:
        obs = np.append(obs, 0)
        probs = np.append(probs, 1.0 - mass)

    expected = total * probs
    pooled_obs: list[float] = []
    pooled_exp: list[float] = []
    acc_o = 0.0
    acc_e = 0.0
    for o, e in zip(obs, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            pooled_obs.append(acc_o)
            pooled_exp.append(acc_e)
            acc_o = 0.0
            acc_e = 0.0
    if acc_e > 0.0 or acc_o > 0.0:
        if pooled_obs:
            pooled_obs[-1] += acc_o
            pooled_exp[-1] += acc_e
        else:
            pooled_obs.append(acc_o)
            pooled_exp.append(acc_e)

    k = len(pooled_obs)
    if k < 2:
        # a bare point mass can still be checked for exact agreement
        peak = np.isclose(probs, 1.0, rtol=0.0, atol=1e-12)
        if peak.sum() == 1 and obs[peak][0] == total:
            return GofResult(statistic=0.0, dof=0, p_value=1.0, n_pooled=k)
        raise InvalidArgumentError(
            "fewer than two pooled categories; the model cannot be tested "
            "at this sample size"
        )

    o_arr = np.asarray(pooled_obs)
    e_arr = np.asarray(pooled_exp)
    statistic = float((((o_arr - e_arr) ** 2) / e_arr).sum())
    dof = k - 1 - n_fitted
    if dof < 1:
        raise InvalidArgumentError(
            f"{k} pooled categories leave no degrees of freedom after "
            f"fitting {n_fitted} parameters"
        )
    p_value = float(sps.chi2.sf(statistic, dof))
    return GofResult(statistic=statistic, dof=dof, p_value=p_value, n_pooled=k)
