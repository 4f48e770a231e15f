"""Tests for the closed-form and semi-analytic performance predictions."""

import math

import numpy as np
import pytest
from scipy.special import betainc
from scipy.stats import gamma

from app.analysis_service import (
    AnalysisError,
    asymptotic_eh_check,
    asymptotic_eh_samples,
    asymptotic_rates,
    axis_distance,
    eh_bounds,
    expected_channel_norm,
    expected_sum_rate,
    f_mu,
    g_mu,
    integrate,
    limited_feedback_analysis,
    order_stat_pdf,
    rate_loss,
    regularized_binomial_sum,
    sincos_expectation,
    sus_statistics,
    wishart_top_eig_mean,
)
from app.models import AnalysisInputs


def ones(x):
    return np.ones_like(x)


def test_full_threshold_keeps_every_candidate():
    stats = sus_statistics(4, 1.0, 50)
    np.testing.assert_allclose(stats.step_probabilities, np.ones(4))
    assert stats.expected_set_size == 4


def test_zero_threshold_empties_later_steps():
    stats = sus_statistics(4, 0.0, 50)
    assert stats.step_probabilities == [1.0, 0.0, 0.0, 0.0]
    assert stats.expected_set_size == 1


def test_second_step_probability():
    """M = 4, eps = 0.3: I_0.09(1, 3) = 1 - 0.91^3."""
    stats = sus_statistics(4, 0.3, 50)
    assert stats.step_probabilities[1] == pytest.approx(1 - 0.91**3)
    assert stats.step_probabilities[1] == pytest.approx(0.2464, abs=1e-4)
    assert stats.expected_candidates[0] == 50


def test_binomial_sum_is_regularized_beta():
    for a1, a2 in [(1, 3), (2, 2), (3, 1), (2, 5)]:
        assert regularized_binomial_sum(0.3, a1, a2) == pytest.approx(betainc(a1, a2, 0.3), rel=1e-12)


def test_expected_set_size_is_capped():
    assert sus_statistics(4, 0.9, 2).expected_set_size <= 2
    assert 1 <= sus_statistics(4, 0.3, 50).expected_set_size <= 4


def test_single_draw_density_is_chi_square():
    density = order_stat_pdf(1, 4, 1)
    x = np.linspace(0.1, 20, 50)
    np.testing.assert_allclose(density(x), x**3 * np.exp(-x) / math.gamma(4), rtol=1e-12)


@pytest.mark.parametrize("set_size", [1, 2.5, 12.3, 50])
def test_density_integrates_to_one(set_size):
    assert order_stat_pdf(1, 4, set_size).expectation(ones) == pytest.approx(1.0, abs=1e-6)


def test_density_mean_grows_with_draws():
    means = [order_stat_pdf(1, 4, n).expectation(lambda x: x) for n in (1, 5, 25, 125)]
    assert means[0] == pytest.approx(4.0, rel=1e-6)
    assert all(later > earlier for earlier, later in zip(means, means[1:]))


def test_density_rejects_empty_draw():
    with pytest.raises(ValueError):
        order_stat_pdf(1, 4, 0.5)


def test_quadrature_failure_reports_diagnostics():
    inputs = AnalysisInputs(quad_initial_nodes=5, quad_max_nodes=9)
    with pytest.raises(AnalysisError, match="did not converge"):
        integrate(lambda x: np.sin(200 * x), 10.0, inputs)


def test_sum_rate_vanishes_without_power():
    assert expected_sum_rate(0.7, 0.0, 4, 0.3, 50) == 0.0


def test_sum_rate_matches_order_statistic_sampling():
    """Quadrature agrees with sampled maxima drawn by inverting F^n."""
    rng = np.random.default_rng(5)
    mu, rho = 0.7, 10.0 / 3
    stats = sus_statistics(4, 0.3, 50)
    sampled = 0.0
    for i in range(stats.expected_set_size):
        n = max(1.0, stats.expected_candidates[i])
        x = gamma.ppf(rng.random(100_000) ** (1 / n), 4)
        sampled += float(np.mean(np.log1p(mu * rho * x)))
    assert expected_sum_rate(mu, rho, 4, 0.3, 50) == pytest.approx(sampled, rel=0.01)


def test_sum_rate_is_monotone_in_mu():
    rates = [expected_sum_rate(mu, 10.0 / 3, 4, 0.3, 50) for mu in (0.2, 0.5, 0.8, 1.0)]
    assert all(later >= earlier for earlier, later in zip(rates, rates[1:]))


def test_rate_loss_vanishes_at_full_ratio():
    assert rate_loss(1.0, 10.0, 4, 0.3, 50) == 0.0
    assert rate_loss(1.0, 10.0, 4, 0.3, 50, high_snr=True) == 0.0


def test_high_snr_rate_loss_closed_form():
    """Four selected users at mu = 0.5 lose 4 ln 2 nats."""
    assert rate_loss(0.5, 10.0, 4, 0.9, 50, high_snr=True) == pytest.approx(4 * math.log(2))
    assert rate_loss(0.5, 10.0, 4, 0.9, 50, high_snr=True) == pytest.approx(2.7726, abs=1e-4)


def test_integral_rate_loss_approaches_closed_form():
    integral = rate_loss(0.7, 1e6, 4, 0.3, 50)
    closed = rate_loss(0.7, 1e6, 4, 0.3, 50, high_snr=True)
    assert integral == pytest.approx(closed, rel=0.01)


def test_rate_loss_rejects_invalid_ratio():
    with pytest.raises(ValueError):
        rate_loss(1.5, 10.0, 4, 0.3, 50)


def test_channel_norm_of_single_user_is_antenna_count():
    assert expected_channel_norm(4, 0.3, 1) == pytest.approx(4.0, rel=1e-6)


def test_channel_norm_grows_with_population():
    assert expected_channel_norm(4, 0.3, 400) > expected_channel_norm(4, 0.3, 50)


def test_g_mu_examples():
    """g equals mu for one user, 1 at mu = 1, and 31/(1/0.7 + 30) at rho E||h||^2 = 30."""
    assert g_mu(0.63, 5.0, 6.0, 1, 4) == pytest.approx(0.63, abs=1e-12)
    assert g_mu(1.0, 5.0, 6.0, 3, 4) == pytest.approx(1.0)
    assert g_mu(0.7, 3.0, 10.0, 4, 4) == pytest.approx(31 / (1 / 0.7 + 30))


def test_g_mu_is_increasing_in_mu():
    values = [g_mu(mu, 3.0, 6.0, 3, 4) for mu in np.linspace(0.05, 1.0, 20)]
    assert all(0 < value <= 1 for value in values)
    assert all(later > earlier for earlier, later in zip(values, values[1:]))


def test_sincos_expectation_for_two_antennas():
    assert sincos_expectation(2) == pytest.approx(math.pi / 8, abs=1e-12)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_sincos_expectation_matches_sampling(m):
    rng = np.random.default_rng(m)
    x = rng.beta(m - 1, 1, 1_000_000)
    assert sincos_expectation(m) == pytest.approx(np.mean(np.sqrt(x * (1 - x))), rel=0.01)


def test_sincos_expectation_vanishes_for_large_arrays():
    values = [sincos_expectation(m) for m in (2, 8, 64, 10_000)]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))
    assert values[-1] < 0.01


def test_f_mu_at_full_ratio_is_isotropic():
    assert f_mu(1.0, 4) == pytest.approx(0.25)


def test_wishart_rank_one_mean():
    assert wishart_top_eig_mean(4, 1, 10_000, seed=3) == pytest.approx(4.0, rel=0.02)


def test_wishart_single_antenna_mean():
    assert wishart_top_eig_mean(1, 5, 10_000, seed=3) == pytest.approx(5.0, rel=0.02)


def test_wishart_trace_bounds():
    estimate = wishart_top_eig_mean(4, 10, 2000, seed=3)
    assert max(4, 10) <= estimate <= 4 * 10
    assert wishart_top_eig_mean(4, 10, 2000, seed=3) == estimate


def test_wishart_requires_enough_samples():
    with pytest.raises(ValueError):
        wishart_top_eig_mean(4, 10, 999)


def test_bounds_collapse_at_full_ratio():
    report = eh_bounds(AnalysisInputs(mu=1.0), lambda_max_mean=24.0)
    assert report.g_mu == pytest.approx(1.0)
    assert report.delta_eh == pytest.approx(0.0, abs=1e-9)
    assert report.zf_expected == pytest.approx(10.0 / 3 * 10.0)


@pytest.mark.parametrize("mu", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_joint_bound_never_below_zf(mu):
    report = eh_bounds(AnalysisInputs(mu=mu), lambda_max_mean=24.0)
    assert report.delta_eh >= 0
    assert report.joint_lower >= report.zf_expected - 1e-9
    assert report.joint_lower_total == pytest.approx(report.set_size * report.joint_lower)


def test_bounds_scale_with_conversion_efficiency():
    full = eh_bounds(AnalysisInputs(mu=0.7), lambda_max_mean=24.0)
    half = eh_bounds(AnalysisInputs(mu=0.7, zeta=0.5), lambda_max_mean=24.0)
    assert half.joint_lower == pytest.approx(full.joint_lower / 2)
    assert half.g_mu == pytest.approx(full.g_mu)


def test_gain_shrinks_for_many_eh_users():
    """With K_EH = 500 the channels fill a hypersphere and the gain per unit energy is small."""
    inputs = AnalysisInputs(k_eh=500, mu=0.7, wishart_samples=2000)
    report = eh_bounds(inputs)
    assert report.delta_eh / (inputs.rho * report.set_size * inputs.k_eh) <= 0.05


def test_asymptotic_rates():
    assert asymptotic_rates(1000, 1.0, 10.0, 4).rate_loss_asymptote == 0.0
    rates = asymptotic_rates(10**6, 0.7, 1e3, 4)
    assert rates.per_stream_loss == pytest.approx(-math.log(0.7), rel=0.05)
    assert rates.sum_rate_asymptote == pytest.approx(4 * math.log(1 + 0.7 * 1e3 * math.log(10**6)))
    growth = [asymptotic_rates(k, 0.7, 3.0, 4).sum_rate_asymptote for k in (10, 100, 1000)]
    assert growth[0] < growth[1] < growth[2]


def test_asymptotic_rates_need_two_users():
    with pytest.raises(ValueError):
        asymptotic_rates(1, 0.7, 3.0, 4)


def test_axis_distance_examples():
    assert axis_distance(0, 4) == pytest.approx(0.25)
    distances = [axis_distance(b, 4) for b in range(12)]
    assert all(later > earlier for earlier, later in zip(distances, distances[1:]))
    assert axis_distance(2, 2) == pytest.approx(1 - 1 / 5)


def test_quantization_loss_vanishes_with_many_bits():
    coarse = limited_feedback_analysis(2, 2, 10, 0.7, 5.0, 2, 13.0)
    fine = limited_feedback_analysis(30, 2, 10, 0.7, 5.0, 2, 13.0)
    assert coarse.delta_q > 0
    assert fine.delta_q <= 1e-3 * coarse.delta_q
    losses = [limited_feedback_analysis(b, 4, 10, 0.7, 5.0, 3, 24.0).delta_q for b in (0, 2, 4, 8, 16, 30)]
    assert all(later < earlier for earlier, later in zip(losses, losses[1:]))


def test_feedback_bound_never_exceeds_perfect_csit():
    perfect = eh_bounds(AnalysisInputs(m=4, k_eh=10, mu=0.7, rho=5.0, set_size=3), lambda_max_mean=24.0)
    report = limited_feedback_analysis(4, 4, 10, 0.7, 5.0, 3, 24.0, perfect.channel_norm_mean)
    assert report.lambda_hat_mean < 24.0
    assert report.fb_lower <= perfect.joint_lower + 1e-9
    assert report.fb_lower + report.delta_q == pytest.approx(perfect.joint_lower, rel=1e-9)


def test_arbitrary_beam_energy_normalizes_to_one():
    assert 0.95 <= asymptotic_eh_check(1000, 4, 200) <= 1.05
    assert asymptotic_eh_check(1, 4, 20_000) == pytest.approx(1.0, abs=0.05)


def test_arbitrary_beam_energy_variance_scales_inversely():
    ratio = np.var(asymptotic_eh_samples(10, 4, 4000)) / np.var(asymptotic_eh_samples(1000, 4, 4000))
    assert 70 <= ratio <= 140
