"""
Tests for threshold calibration
"""

import math

import numpy as np
import pytest
from scipy import stats

from calibration import (AnalyticMarginal, SamplerMarginal, ThresholdLadder, beta_from_alpha, ladder_levels,
                         mc_marginal_quantile, mc_marginal_quantiles, threshold_ladder)
from distributions import Gaussian, Pareto, RandomStream
from errors import CalibrationError, DomainError, InsufficientTailMassError

BETA = -math.log(0.95)


def gaussian_sampler(rng, size):
    return rng.standard_normal(size)


def test_beta_from_alpha():
    assert beta_from_alpha(0.05) == pytest.approx(BETA)
    with pytest.raises(DomainError):
        beta_from_alpha(1.0)


def test_ladder_levels():
    assert ladder_levels(0.05, 100, 3) == pytest.approx([BETA / 100, 2 * BETA / 100, 3 * BETA / 100])
    sidak = ladder_levels(0.05, 100, 2, 'sidak')
    assert sidak[0] == pytest.approx(1 - 0.95 ** 0.01)
    assert sidak[1] == pytest.approx(2 * BETA / 100)
    with pytest.raises(DomainError):
        ladder_levels(0.05, 100, 0)
    with pytest.raises(DomainError):
        ladder_levels(0.5, 1, 2)


def test_analytic_ladder_matches_gaussian_quantiles():
    ladder = threshold_ladder(AnalyticMarginal(Gaussian()), 0.05, 10_000, 3)
    assert ladder.method == 'analytic'
    assert ladder.t1 == pytest.approx(stats.norm.isf(BETA / 10_000))
    assert ladder.t1 == pytest.approx(4.41, abs=0.01)
    assert ladder.thresholds[2] == pytest.approx(stats.norm.isf(3 * BETA / 10_000))
    assert ladder.se == (0.0, 0.0, 0.0)


def test_analytic_pareto_threshold():
    ladder = threshold_ladder(AnalyticMarginal(Pareto(2.0), 2.0), 0.05, 1000)
    # 2 * (beta / nu)^(-1/2)
    assert ladder.t1 == pytest.approx(2.0 * (BETA / 1000) ** -0.5)


def test_monte_carlo_quantile_close_to_exact():
    t, se = mc_marginal_quantile(gaussian_sampler, 0.01, 400_000, RandomStream(3), chunk_size=50_000)
    assert se > 0
    assert t == pytest.approx(stats.norm.isf(0.01), abs=max(5 * se, 0.02))


def test_monte_carlo_quantiles_independent_of_threads():
    levels = [0.001, 0.002, 0.003]
    one = mc_marginal_quantiles(gaussian_sampler, levels, 200_000, RandomStream(4), 30_000, threads=1)
    four = mc_marginal_quantiles(gaussian_sampler, levels, 200_000, RandomStream(4), 30_000, threads=4)
    assert one == four
    assert one[0][0] > one[1][0] > one[2][0]


def test_monte_carlo_ladder_records_budget_and_seed():
    marginal = SamplerMarginal(gaussian_sampler, 300_000, RandomStream(12), chunk_size=100_000)
    ladder = threshold_ladder(marginal, 0.05, 100, 2)
    assert ladder.method == 'monte-carlo'
    assert ladder.budget == 300_000
    assert ladder.seed == 12
    assert ladder.k == 2


def test_insufficient_tail_mass():
    with pytest.raises(InsufficientTailMassError):
        mc_marginal_quantile(gaussian_sampler, 0.01, 1000, RandomStream(1))


def test_ladder_must_decrease():
    with pytest.raises(CalibrationError):
        ThresholdLadder((2.0, 2.0), (0.1, 0.2), (0.0, 0.0), BETA, 0.05, 10, 'analytic')


def test_ladder_dict_round_trip():
    ladder = threshold_ladder(AnalyticMarginal(Gaussian()), 0.05, 500, 2)
    assert ThresholdLadder.from_dict(ladder.to_dict()) == ladder


def test_monte_carlo_quantile_of_exact_sample():
    # type-7 quantile of the values 1..1000 at survival 0.1
    values = np.arange(1, 1001, dtype=float)

    def sampler(rng, size):
        return rng.permutation(values)[:size]
    t, _ = mc_marginal_quantile(sampler, 0.1, 1000, RandomStream(2), chunk_size=1000)
    assert t == pytest.approx(np.quantile(values, 0.9))
    assert t == pytest.approx(900.1)


def test_constant_sampler_has_exact_quantile():
    t, se = mc_marginal_quantile(lambda rng, size: np.full(size, 3.0), 0.1, 10_000, RandomStream(5))
    assert t == 3.0
    assert se == 0.0


def test_monte_carlo_se_tracks_asymptotic_value():
    marginal = AnalyticMarginal(Gaussian())
    ses = []
    for budget in (400_000, 1_600_000):
        _, se = mc_marginal_quantile(gaussian_sampler, 0.05, budget, RandomStream(6), chunk_size=200_000)
        assert se == pytest.approx(marginal.quantile_se(0.05, budget), rel=0.25)
        ses.append(se)
    # four times the budget halves the error
    assert ses[1] / ses[0] == pytest.approx(0.5, abs=0.15)


def test_analytic_density_is_scaled():
    marginal = AnalyticMarginal(Gaussian(), 2.0)
    assert marginal.density(1.0) == pytest.approx(stats.norm.pdf(1.0, scale=2.0))
    assert marginal.quantile_se(0.5, 100) == pytest.approx(0.05 / stats.norm.pdf(0.0, scale=2.0))
