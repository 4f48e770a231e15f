"""Closed-form and semi-analytic performance predictions.

Channel gains ``||h||^2`` of unit-variance complex Gaussian channels are Gamma(M, 1)
distributed, which is the chi-square(2M) law in the normalization used throughout.
All rates are in nats.
"""

import logging
from math import exp, log, sqrt
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.special import betaln
from scipy.stats import binom, gamma

from app.models import AnalysisInputs, AsymptoticRates, EhBoundReport, LimitedFeedbackReport, RealArray, SusStatistics

logger = logging.getLogger(__name__)

DEFAULT_INPUTS = AnalysisInputs()
WISHART_CHUNK = 512


class AnalysisError(ArithmeticError):
    """Quadrature did not converge."""


def regularized_binomial_sum(x: float, a1: int, a2: int) -> float:
    """Regularized incomplete beta ``I_x(a1, a2)`` for integer parameters as a finite binomial sum."""
    n = a1 + a2 - 1
    terms = binom.pmf(np.arange(a1, n + 1), n, x)
    return float(np.sum(terms))


def sus_statistics(m: int, epsilon: float, k_id: int) -> SusStatistics:
    """Candidate-set law of semi-orthogonal user selection.

    ``Pr[k in U_1] = 1`` and ``Pr[k in U_{i+1}] = I_{eps^2}(i, M - i)``; by the law of large
    numbers ``|U_i| ~ K_ID * Pr[k in U_i]``. The expected number of selected users sums the
    probabilities that each step still has a candidate.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    probabilities = [1.0] + [regularized_binomial_sum(epsilon**2, i, m - i) for i in range(1, m)]
    candidates = [k_id * p for p in probabilities]
    occupied = sum(1.0 - (1.0 - p) ** k_id for p in probabilities)
    set_size = int(min(m, k_id, max(1, round(occupied))))
    return SusStatistics(step_probabilities=probabilities, expected_candidates=candidates, expected_set_size=set_size)


class OrderStatisticDensity:
    """Density of the largest of ``set_size`` i.i.d. Gamma(M, 1) channel gains.

    ``f_max(x) = n f(x) F(x)^(n-1)``; ``set_size`` may be fractional when it comes from
    an expected candidate-set size.
    """

    def __init__(self, index: int, m: int, set_size: float, inputs: AnalysisInputs = DEFAULT_INPUTS):
        if set_size < 1:
            raise ValueError(f"order statistic needs at least one draw, got {set_size}")
        self.index = index
        self.m = m
        self.set_size = float(set_size)
        self.inputs = inputs

    def __call__(self, x: RealArray) -> RealArray:
        x = np.asarray(x, dtype=np.float64)
        n = self.set_size
        return n * gamma.pdf(x, self.m) * gamma.cdf(x, self.m) ** (n - 1)

    @property
    def upper_limit(self) -> float:
        # Union bound: Pr[max > x] <= n Pr[X > x].
        return float(gamma.isf(self.inputs.quad_tail / self.set_size, self.m))

    def expectation(self, func: Callable[[RealArray], RealArray]) -> float:
        return integrate(lambda x: func(x) * self(x), self.upper_limit, self.inputs)


def integrate(
    integrand: Callable[[RealArray], RealArray], upper: float, inputs: AnalysisInputs = DEFAULT_INPUTS
) -> float:
    """Simpson's rule on ``[0, upper]`` with node doubling until successive estimates agree."""
    nodes = inputs.quad_initial_nodes | 1
    x = np.linspace(0.0, upper, nodes)
    estimate = float(simpson(integrand(x), x=x))
    while nodes < inputs.quad_max_nodes:
        nodes = 2 * nodes - 1
        x = np.linspace(0.0, upper, nodes)
        refined = float(simpson(integrand(x), x=x))
        if abs(refined - estimate) <= inputs.quad_rtol * abs(refined):
            return refined
        estimate, previous = refined, estimate
        logger.debug(f"Refining quadrature to {nodes} nodes: {previous:.12g} -> {refined:.12g}")
    raise AnalysisError(
        f"quadrature on [0, {upper:.6g}] did not converge within {inputs.quad_max_nodes} nodes; "
        f"last estimate {estimate:.12g}"
    )


def order_stat_pdf(i: int, m: int, set_size: float, inputs: AnalysisInputs = DEFAULT_INPUTS) -> OrderStatisticDensity:
    return OrderStatisticDensity(i, m, set_size, inputs)


def _selected_densities(m: int, epsilon: float, k_id: int, inputs: AnalysisInputs) -> list[OrderStatisticDensity]:
    stats = sus_statistics(m, epsilon, k_id)
    return [
        order_stat_pdf(i + 1, m, max(1.0, stats.expected_candidates[i]), inputs)
        for i in range(stats.expected_set_size)
    ]


def expected_sum_rate(
    mu: float, rho: float, m: int, epsilon: float, k_id: int, inputs: AnalysisInputs = DEFAULT_INPUTS
) -> float:
    """``sum_i E[ln(1 + mu rho x)]`` over the order statistics of the selected users."""
    if mu * rho == 0:
        return 0.0
    return sum(
        density.expectation(lambda x: np.log1p(mu * rho * x))
        for density in _selected_densities(m, epsilon, k_id, inputs)
    )


def rate_loss(
    mu: float,
    rho: float,
    m: int,
    epsilon: float,
    k_id: int,
    high_snr: bool = False,
    inputs: AnalysisInputs = DEFAULT_INPUTS,
) -> float:
    """Sum-rate loss of the joint design against ZF; ``high_snr`` selects ``-|S| ln mu``."""
    if not 0 < mu <= 1:
        raise ValueError(f"mu must lie in (0, 1], got {mu}")
    if mu == 1:
        return 0.0
    densities = _selected_densities(m, epsilon, k_id, inputs)
    if high_snr:
        return -len(densities) * log(mu)
    return sum(
        density.expectation(lambda x: np.log1p(rho * x) - np.log1p(mu * rho * x)) for density in densities
    )


def expected_channel_norm(m: int, epsilon: float, k_id: int, inputs: AnalysisInputs = DEFAULT_INPUTS) -> float:
    """Mean ``||h||^2`` over the selected users."""
    densities = _selected_densities(m, epsilon, k_id, inputs)
    return sum(density.expectation(lambda x: x) for density in densities) / len(densities)


def g_mu(mu: float, rho: float, eh2: float, set_size: int, m: int) -> float:
    """Expected ``cos^2`` between a joint beam and its ZF start for target ratio ``mu``."""
    if not 0 < mu <= 1:
        raise ValueError(f"mu must lie in (0, 1], got {mu}")
    interference = rho * eh2 * (set_size - 1) / (m - 1)
    return (1 + interference) / (1 / mu + interference)


def beta_function(a: float, b: float) -> float:
    return exp(betaln(a, b))


def sincos_expectation(m: int) -> float:
    """``E[sin(phi) cos(phi)]`` for ``sin^2(phi) ~ Beta(M - 1, 1)``."""
    if m < 2:
        raise ValueError(f"M must be at least 2, got {m}")
    return (m - 1) * beta_function(1.5, m - 0.5)


def f_mu(g_value: float, m: int) -> float:
    return ((m - 2) * g_value + 1) / (m * (m - 1)) - 2 * beta_function(1.5, m - 0.5) * sqrt(g_value * (1 - g_value))


def wishart_top_eig_mean(m: int, k_eh: int, samples: int = 10_000, seed: int = 11) -> float:
    """Monte Carlo mean of the largest eigenvalue of ``G^H G`` for i.i.d. CN(0, 1) ``G``."""
    if samples < 1000:
        raise ValueError(f"at least 1000 samples are required, got {samples}")
    rng = np.random.default_rng(seed)
    total = 0.0
    remaining = samples
    while remaining:
        chunk = min(remaining, WISHART_CHUNK)
        g = (rng.standard_normal((chunk, k_eh, m)) + 1j * rng.standard_normal((chunk, k_eh, m))) / np.sqrt(2)
        gram = np.conj(np.swapaxes(g, 1, 2)) @ g
        total += float(np.sum(np.linalg.eigvalsh(gram)[:, -1]))
        remaining -= chunk
    return total / samples


def resolve_set_size(inputs: AnalysisInputs) -> int:
    if inputs.set_size is not None:
        return inputs.set_size
    return sus_statistics(inputs.m, inputs.epsilon, inputs.k_id).expected_set_size


def eh_bounds(inputs: AnalysisInputs, lambda_max_mean: Optional[float] = None) -> EhBoundReport:
    """Expected harvested energy of joint and ZF beams and the gain between them."""
    m, rho = inputs.m, inputs.rho * inputs.zeta
    lam = lambda_max_mean
    if lam is None:
        lam = wishart_top_eig_mean(m, inputs.k_eh, inputs.wishart_samples, inputs.wishart_seed)
    frob = float(m * inputs.k_eh)
    set_size = resolve_set_size(inputs)
    eh2 = expected_channel_norm(m, inputs.epsilon, inputs.k_id, inputs)
    g_value = g_mu(inputs.mu, inputs.rho, eh2, set_size, m)
    f_value = f_mu(g_value, m)
    spread = m * lam - frob

    joint_lower = rho * (lam - spread * f_value)
    zf_expected = rho * (lam - spread / m)
    return EhBoundReport(
        lambda_max_mean=lam,
        frob_mean=frob,
        set_size=set_size,
        channel_norm_mean=eh2,
        g_mu=g_value,
        sincos=sincos_expectation(m),
        f_mu=f_value,
        joint_lower=joint_lower,
        zf_expected=zf_expected,
        delta_eh=rho * set_size * spread * (1 / m - f_value),
        joint_lower_total=set_size * joint_lower,
        zf_expected_total=set_size * zf_expected,
    )


def asymptotic_rates(k_id: int, mu: float, rho: float, m: int) -> AsymptoticRates:
    """Large-``K_ID`` sum rates, where the best channel gain grows like ``ln K_ID``."""
    if k_id < 2:
        raise ValueError(f"asymptotics need K_ID >= 2, got {k_id}")
    growth = rho * log(k_id)
    per_stream_loss = log(1 + growth) - log(1 + mu * growth)
    return AsymptoticRates(
        sum_rate_asymptote=m * log(1 + mu * growth),
        zf_sum_rate_asymptote=m * log(1 + growth),
        per_stream_loss=per_stream_loss,
        rate_loss_asymptote=m * per_stream_loss,
    )


def axis_distance(b_eh: int, m: int) -> float:
    """Expected ``|v^H v_hat|^2`` between an ellipsoid axis and its ``b_eh``-bit quantization."""
    if b_eh < 0:
        raise ValueError(f"feedback bits must be nonnegative, got {b_eh}")
    codewords = 2.0**b_eh
    return 1.0 - exp(log(codewords) + betaln(codewords, m / (m - 1)))


def limited_feedback_analysis(
    b_eh: int,
    m: int,
    k_eh: int,
    mu: float,
    rho: float,
    set_size: int,
    wishart_mean: float,
    eh2: Optional[float] = None,
) -> LimitedFeedbackReport:
    """Energy bound under quantized EH channel directions and the loss against perfect CSIT.

    ``eh2`` is the mean selected channel gain entering ``g(mu)``; it defaults to ``M``.
    """
    delta_d = axis_distance(b_eh, m)
    frob = float(m * k_eh)
    lambda_hat = wishart_mean * delta_d + (frob - wishart_mean) / m * (1 - delta_d)
    f_value = f_mu(g_mu(mu, rho, float(m) if eh2 is None else eh2, set_size, m), m)
    fb_lower = rho * (lambda_hat - (m * lambda_hat - frob) * f_value)
    delta_q = rho * (1 - m * f_value) * (wishart_mean - lambda_hat)
    return LimitedFeedbackReport(
        delta_d=delta_d,
        lambda_hat_mean=lambda_hat,
        fb_lower=fb_lower,
        delta_q=delta_q,
        fb_lower_total=set_size * fb_lower,
        delta_q_total=set_size * delta_q,
    )


def asymptotic_eh_samples(k_eh: int, m: int, samples: int, seed: int = 13) -> RealArray:
    """Samples of ``||G w||^2 / K_EH`` for a fixed random unit ``w`` and fresh ``G`` per sample."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    w /= np.linalg.norm(w)
    values = np.empty(samples)
    for start in range(0, samples, WISHART_CHUNK):
        chunk = min(WISHART_CHUNK, samples - start)
        g = (rng.standard_normal((chunk, k_eh, m)) + 1j * rng.standard_normal((chunk, k_eh, m))) / np.sqrt(2)
        values[start : start + chunk] = np.sum(np.abs(g @ w) ** 2, axis=1) / k_eh
    return values


def asymptotic_eh_check(k_eh: int, m: int, samples: int, seed: int = 13) -> float:
    """Mean normalized energy of an arbitrary beam; tends to 1 as ``K_EH`` grows."""
    return float(np.mean(asymptotic_eh_samples(k_eh, m, samples, seed)))
