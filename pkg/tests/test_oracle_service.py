"""Tests for the random-restart energy maximization baseline."""

import numpy as np
import pytest

from app.beamformer_service import eh_direction, g_eh, geodesic_cap, joint_beamform, steer
from app.channel_service import complex_gaussian, generate_channels
from app.metrics_service import harvested_energy, sinr_all
from app.models import OracleConfig, SimConfig
from app.numerics import NUMERIC
from app.oracle_service import OracleError, oracle_solve
from app.scheduler_service import sus_select, zf_beamformers

QUICK = OracleConfig(restarts=3, stages=4, steps=20)


def instance(cfg: SimConfig, trial: int) -> tuple[np.ndarray, np.ndarray, float]:
    cs = generate_channels(cfg, (5, trial))
    h_s = cs.h[list(sus_select(cs.h, cfg.epsilon, cfg.m).indices)]
    return h_s, cs.g, cfg.effective_snr / h_s.shape[0]


def test_full_ratio_keeps_zf_targets(small_cfg):
    """At mu = 1 the result meets the ZF SINRs and harvests no less than ZF."""
    h_s, g, rho = instance(small_cfg, 0)
    zf = zf_beamformers(h_s, rho)
    result = oracle_solve(h_s, g, rho, 1.0, QUICK)
    zf_value = harvested_energy(g, zf.w, rho)
    assert np.all(sinr_all(h_s, result.w, rho) >= zf.sinr_zf * (1 - NUMERIC.feasibility_tol))
    assert result.eh_value >= zf_value * (1 - 1e-9)


def test_full_ratio_with_full_rank_selection_is_zf(rng):
    """With as many users as antennas only the ZF beams are feasible at mu = 1."""
    h_s = complex_gaussian(rng, (4, 4))
    g = complex_gaussian(rng, (3, 4))
    rho = 10.0 / 4
    result = oracle_solve(h_s, g, rho, 1.0, QUICK)
    assert result.eh_value == pytest.approx(harvested_energy(g, zf_beamformers(h_s, rho).w, rho), rel=1e-3)


def test_tiny_instance_matches_grid_search():
    """One user, one EH user, two antennas: within 0.5% of the best feasible point on the geodesic."""
    h = np.array([[1.0, 0.2j]])
    g = np.array([[0.3, 1.0 + 0.4j]])
    rho, mu = 10.0, 0.7
    zf = zf_beamformers(h, rho)
    w_zf = zf.w[:, 0]
    target = eh_direction(g)
    best = 0.0
    for theta in np.linspace(0.0, geodesic_cap(target, w_zf), 10_000):
        w = steer(w_zf, target, theta)
        if sinr_all(h, w, rho)[0] >= mu * zf.sinr_zf[0]:
            best = max(best, rho * g_eh(g, w))
    result = oracle_solve(h, g, rho, mu, OracleConfig(restarts=4))
    assert result.eh_value == pytest.approx(best, rel=0.005)


def test_result_is_feasible_and_beats_zf(small_cfg):
    for trial in range(3):
        h_s, g, rho = instance(small_cfg, trial)
        result = oracle_solve(h_s, g, rho, 0.7, QUICK)
        zf = zf_beamformers(h_s, rho)
        assert np.all(sinr_all(h_s, result.w, rho) >= 0.7 * zf.sinr_zf * (1 - NUMERIC.feasibility_tol))
        np.testing.assert_allclose(np.linalg.norm(result.w, axis=0), np.ones(h_s.shape[0]), atol=1e-9)
        assert result.eh_value >= harvested_energy(g, zf.w, rho) * (1 - 1e-12)
        assert result.feasible_restarts >= 1


def test_warm_start_is_never_beaten_by_the_result(small_cfg):
    """Seeded with the joint beams the oracle is at least as good as them."""
    for trial in range(3):
        h_s, g, rho = instance(small_cfg, trial)
        joint = joint_beamform(h_s, g, small_cfg)
        result = oracle_solve(h_s, g, rho, small_cfg.mu, QUICK, warm_starts=(joint.w,))
        assert result.eh_value >= harvested_energy(g, joint.w, rho) * (1 - 1e-12)


def test_best_trace_is_monotone(small_cfg):
    h_s, g, rho = instance(small_cfg, 1)
    trace = np.array(oracle_solve(h_s, g, rho, 0.6, QUICK).best_trace)
    assert trace.size >= 1
    assert np.all(np.diff(trace) >= 0)


def test_infeasible_warm_start_is_discarded(small_cfg):
    """A warm start with identical beams breaks the targets and is skipped."""
    h_s, g, rho = instance(small_cfg, 2)
    clumped = np.full((small_cfg.m, h_s.shape[0]), 1 / np.sqrt(small_cfg.m), dtype=np.complex128)
    result = oracle_solve(h_s, g, rho, 0.9, QUICK, warm_starts=(clumped,))
    floor = 0.9 * zf_beamformers(h_s, rho).sinr_zf * (1 - NUMERIC.feasibility_tol)
    assert np.all(sinr_all(h_s, result.w, rho) >= floor)


def test_solver_is_deterministic(small_cfg):
    h_s, g, rho = instance(small_cfg, 0)
    first = oracle_solve(h_s, g, rho, 0.5, QUICK)
    second = oracle_solve(h_s, g, rho, 0.5, QUICK)
    np.testing.assert_array_equal(first.w, second.w)


def test_ratio_above_one_is_infeasible(small_cfg):
    h_s, g, rho = instance(small_cfg, 0)
    with pytest.raises(OracleError):
        oracle_solve(h_s, g, rho, 1.1, QUICK)


def test_energy_scales_with_conversion_efficiency(small_cfg):
    h_s, g, rho = instance(small_cfg, 0)
    full = oracle_solve(h_s, g, rho, 0.7, QUICK)
    half = oracle_solve(h_s, g, rho, 0.7, QUICK, zeta=0.5)
    assert half.eh_value == pytest.approx(full.eh_value / 2)
