"""Tests for the estimators and goodness-of-fit machinery."""

import numpy as np
import pytest

from qgalton.errors import (
    DegenerateFitError,
    InvalidArgumentError,
    InvalidDistributionError,
)
from qgalton.stats import (
    BinHistogram,
    ConsistencyReport,
    FitResult,
    chi_square_gof,
    fit_exponential,
    fit_poisson,
    fit_t2,
    mean_consistency,
    _grid_degeneracy,
)
from qgalton.walk import bin_probabilities


class TestBinHistogram:
    def test_from_pixels(self):
        h = BinHistogram.from_pixels([0, 3, 3, 15], 16)
        assert h.total == 4
        assert h.counts[3] == 2
        assert h.frequencies[3] == pytest.approx(0.5)

    def test_pixel_bounds_checked(self):
        with pytest.raises(InvalidArgumentError):
            BinHistogram.from_pixels([16], 16)

    def test_empty_frequencies_fail(self):
        h = BinHistogram(np.zeros(16, dtype=np.int64))
        with pytest.raises(DegenerateFitError):
            _ = h.frequencies

    def test_negative_counts_rejected(self):
        with pytest.raises(InvalidArgumentError):
            BinHistogram(np.array([1, -1]))


class TestFitT2:
    def test_noise_free_closure(self):
        # histogram proportional to the exact model recovers t^2 to 1e-5
        for true in (0.3, 0.5, 0.763, 0.816):
            counts = np.round(bin_probabilities(8, true) * 1e9).astype(np.int64)
            r = fit_t2(counts, n_bootstrap=10, seed=0)
            assert r.estimate == pytest.approx(true, abs=1e-5)
            assert r.residual < 1e-12

    def test_recovers_from_multinomial_draws(self):
        true = 0.763
        p = bin_probabilities(8, true)
        counts = np.random.default_rng(5).multinomial(10_000, p)
        r = fit_t2(counts, n_bootstrap=400, seed=1)
        # estimator sd at this sample size is about 0.0012
        assert r.estimate == pytest.approx(true, abs=0.006)
        assert r.ci_low <= true <= r.ci_high
        assert (r.ci_high - r.ci_low) / 2 < 0.01
        assert r.mle == pytest.approx(r.estimate, abs=0.01)
        assert r.n_samples == 10_000

    def test_mirror_equivariance(self):
        # feeding the mirrored histogram as the right-input model must give
        # the same transmission
        p = bin_probabilities(8, 0.7)
        counts = np.random.default_rng(9).multinomial(20_000, p)
        left = fit_t2(counts, n_bootstrap=10, seed=0, input_port="left")
        right = fit_t2(counts[::-1].copy(), n_bootstrap=10, seed=0,
                       input_port="right")
        assert right.estimate == pytest.approx(left.estimate, abs=1e-6)

    def test_point_mass_pulls_to_bound(self):
        counts = np.zeros(16, dtype=np.int64)
        counts[7] = 5000  # the all-transmission exit
        r = fit_t2(counts, n_bootstrap=10, seed=0)
        assert r.estimate > 0.999

    def test_empty_histogram_degenerate(self):
        with pytest.raises(DegenerateFitError):
            fit_t2(np.zeros(16, dtype=np.int64))

    def test_odd_length_rejected(self):
        with pytest.raises(InvalidArgumentError):
            fit_t2(np.ones(15, dtype=np.int64))

    def test_negative_counts_rejected(self):
        counts = np.ones(16, dtype=np.int64)
        counts[2] = -4
        with pytest.raises(InvalidArgumentError):
            fit_t2(counts)

    def test_accepts_bin_histogram(self):
        counts = np.round(bin_probabilities(8, 0.6) * 1e7).astype(np.int64)
        r = fit_t2(BinHistogram(counts), n_bootstrap=10, seed=0)
        assert r.estimate == pytest.approx(0.6, abs=1e-4)

    def test_both_bound_objective_rejected(self):
        obj = np.ones(11)
        obj[0] = obj[-1] = 0.0
        with pytest.raises(DegenerateFitError):
            _grid_degeneracy(obj)

    def test_single_bound_objective_allowed(self):
        obj = np.linspace(0.0, 1.0, 11)
        _grid_degeneracy(obj)  # minimum only at the left end: fine


class TestFitPoisson:
    def test_recovers_mean(self):
        counts = np.random.default_rng(2).poisson(4.0, 10_000)
        r = fit_poisson(counts, n_bootstrap=400, seed=3)
        assert r.estimate == pytest.approx(4.0, abs=0.06)
        assert r.ci_low <= 4.0 <= r.ci_high
        assert r.mle == pytest.approx(counts.mean())

    def test_small_mean(self):
        counts = np.random.default_rng(8).poisson(0.3, 20_000)
        r = fit_poisson(counts, n_bootstrap=200, seed=0)
        assert r.estimate == pytest.approx(0.3, abs=0.02)

    def test_all_zero_rule_of_three(self):
        r = fit_poisson(np.zeros(1000, dtype=int), n_bootstrap=50, seed=0)
        assert r.estimate == 0.0
        assert r.ci_low == 0.0
        assert r.ci_high == pytest.approx(3.0 / 1000)
        assert "all-zero" in r.flags

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            fit_poisson(np.array([4]))
        with pytest.raises(InvalidArgumentError):
            fit_poisson(np.array([1, -2, 3]))

    def test_result_serializes(self):
        counts = np.random.default_rng(1).poisson(2.0, 500)
        d = fit_poisson(counts, n_bootstrap=20, seed=0).to_dict()
        assert set(d) >= {"estimate", "ci_low", "ci_high", "method", "flags"}


class TestFitExponential:
    def test_recovers_scale(self):
        gaps = np.random.default_rng(4).exponential(0.5e-6, 30_000)
        r = fit_exponential(gaps, n_bootstrap=300, seed=2)
        assert r.estimate == pytest.approx(0.5e-6, rel=0.02)
        assert r.ci_low <= r.estimate <= r.ci_high
        assert r.mle == pytest.approx(gaps.mean())

    def test_scale_equivariance(self):
        # rescaling every gap by c rescales the fit by c, since the bin
        # edges are tied to the sample mean
        gaps = np.random.default_rng(6).exponential(1.0, 5_000)
        base = fit_exponential(gaps, n_bootstrap=10, seed=0)
        scaled = fit_exponential(gaps * 2.5e-7, n_bootstrap=10, seed=0)
        assert scaled.estimate == pytest.approx(base.estimate * 2.5e-7, rel=1e-5)

    def test_rejects_bad_gaps(self):
        with pytest.raises(DegenerateFitError):
            fit_exponential(np.array([1.0]))
        with pytest.raises(InvalidArgumentError):
            fit_exponential(np.array([0.5, -0.1]))
        with pytest.raises(DegenerateFitError):
            fit_exponential(np.zeros(10))


class TestChiSquare:
    def test_hand_computed_statistic(self):
        # obs [30, 20, 50] against p [1/4, 1/4, 1/2] at N=100:
        # chi2 = 25/25 + 25/25 + 0 = 2.0 with dof 2, and for dof 2 the
        # survival function is exactly exp(-x/2)
        g = chi_square_gof(np.array([30, 20, 50]),
                           np.array([0.25, 0.25, 0.5]))
        assert g.statistic == pytest.approx(2.0, abs=1e-12)
        assert g.dof == 2
        assert g.p_value == pytest.approx(np.exp(-1.0), abs=1e-12)
        assert g.n_pooled == 3

    def test_fitted_parameters_reduce_dof(self):
        g = chi_square_gof(np.array([30, 20, 50]),
                           np.array([0.25, 0.25, 0.5]), n_fitted=1)
        assert g.dof == 1

    def test_small_cells_pooled(self):
        # middle cells expect 2 each and pool together
        obs = np.array([50, 2, 3, 45])
        probs = np.array([0.5, 0.02, 0.03, 0.45])
        g = chi_square_gof(obs, probs)
        assert g.n_pooled == 3

    def test_trailing_remainder_folds_left(self):
        obs = np.array([50, 49, 1])
        probs = np.array([0.5, 0.49, 0.01])
        g = chi_square_gof(obs, probs)
        assert g.n_pooled == 2
        # perfect agreement after folding
        assert g.statistic == pytest.approx(0.0, abs=1e-12)

    def test_deficit_mass_becomes_tail_category(self):
        # model covers only 0.9 of the mass; the missing 0.1 expects
        # 10 counts and sees none: chi2 = 100/10 + 25/45 + 25/45
        obs = np.array([50, 50])
        probs = np.array([0.45, 0.45])
        g = chi_square_gof(obs, probs)
        assert g.statistic == pytest.approx(100 / 10 + 2 * 25 / 45, abs=1e-9)
        assert g.n_pooled == 3

    def test_point_mass_exact_match(self):
        g = chi_square_gof(np.array([100, 0]), np.array([1.0, 0.0]))
        assert g.statistic == 0.0
        assert g.p_value == 1.0
        assert g.dof == 0

    def test_point_mass_mismatch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            chi_square_gof(np.array([99, 1]), np.array([1.0, 0.0]))

    def test_calibration_near_nominal(self):
        # true-model data should reject at roughly the nominal 5 percent
        rng = np.random.default_rng(13)
        probs = np.full(8, 1 / 8.0)
        rejects = sum(
            chi_square_gof(rng.multinomial(2000, probs), probs).p_value < 0.05
            for _ in range(300)
        )
        assert 3 <= rejects <= 30  # 5 percent of 300 is 15

    def test_power_against_truncation(self):
        # clipping a Poisson at 5 is the kind of distortion this must catch
        rng = np.random.default_rng(14)
        from scipy import stats as sps

        counts = np.minimum(rng.poisson(4.0, 5000), 5)
        hist = np.bincount(counts, minlength=10)
        probs = sps.poisson.pmf(np.arange(10), 4.0)
        g = chi_square_gof(hist, probs)
        assert g.p_value < 1e-6

    def test_validation_errors(self):
        with pytest.raises(InvalidArgumentError):
            chi_square_gof(np.array([1, 2]), np.array([0.5]))
        with pytest.raises(InvalidDistributionError):
            chi_square_gof(np.array([1, 2]), np.array([0.9, 0.4]))
        with pytest.raises(InvalidArgumentError):
            chi_square_gof(np.zeros(3, dtype=int), np.full(3, 1 / 3))
        with pytest.raises(InvalidArgumentError):
            chi_square_gof(np.array([50, 50]), np.array([0.5, 0.5]), n_fitted=1)


def make_fit(estimate, lo, hi):
    return FitResult(estimate=estimate, ci_low=lo, ci_high=hi, residual=0.0,
                     method="least-squares", n_samples=100, n_bootstrap=10,
                     seed=0)


class TestMeanConsistency:
    def test_agreeing_fits_overlap(self):
        counts = make_fit(4.0, 3.9, 4.1)
        taus = make_fit(0.5e-6, 0.48e-6, 0.52e-6)  # implies 3.85..4.17
        rep = mean_consistency(counts, taus, 2e-6)
        assert rep.implied_mean == pytest.approx(4.0)
        assert rep.implied_ci[0] == pytest.approx(2e-6 / 0.52e-6)
        assert rep.implied_ci[1] == pytest.approx(2e-6 / 0.48e-6)
        assert rep.implied_ci[0] < rep.implied_ci[1]
        assert rep.ci_overlap
        assert rep.ratio == pytest.approx(1.0)

    def test_disagreeing_fits_flagged(self):
        counts = make_fit(4.0, 3.95, 4.05)
        taus = make_fit(0.25e-6, 0.24e-6, 0.26e-6)  # implies about 8
        rep = mean_consistency(counts, taus, 2e-6)
        assert not rep.ci_overlap
        assert rep.ratio == pytest.approx(0.5, rel=0.01)

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            mean_consistency(make_fit(4, 3, 5), make_fit(0.5, 0.4, 0.6), 0.0)
        with pytest.raises(InvalidArgumentError):
            mean_consistency(make_fit(4, 3, 5), make_fit(0.0, 0.0, 0.1), 2e-6)

    def test_serializes(self):
        rep = mean_consistency(make_fit(4.0, 3.9, 4.1),
                               make_fit(0.5e-6, 0.48e-6, 0.52e-6), 2e-6)
        d = rep.to_dict()
        assert isinstance(d["ci_overlap"], bool)
        assert d["implied_mean"] == pytest.approx(4.0)
