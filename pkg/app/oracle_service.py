"""Near-optimal baseline for energy maximization under SINR-ratio constraints.

Maximizes ``sum_i rho ||G w_i||^2`` over unit beams subject to
``SINR_i >= mu * SINR_i^ZF`` by projected gradient ascent from many feasible starts.
Iterates never leave the feasible set: a step that crosses a constraint is pulled back
by bisection toward the last feasible point, and a quadratic penalty on a shrinking
margin band keeps the ascent sliding along active constraints instead of stalling.
"""

import logging
from typing import Sequence

import numpy as np

from app.metrics_service import harvested_energy, sinr_all
from app.models import ComplexArray, OracleConfig, OracleResult, RealArray
from app.numerics import NUMERIC, gram_ellipsoid
from app.scheduler_service import zf_beamformers

logger = logging.getLogger(__name__)


class OracleError(RuntimeError):
    """No feasible beamformer was found."""


class _Problem:
    def __init__(self, h_s: ComplexArray, g: ComplexArray, rho: float, gamma: RealArray, tol: float):
        self.h_s = h_s
        self.rho = rho
        self.gamma = gamma
        self.floor = gamma * (1 - tol)
        self.gram = g.conj().T @ g
        self.scale = max(gram_ellipsoid(g).lambda_max * h_s.shape[0], np.finfo(float).tiny)

    def feasible(self, w: ComplexArray) -> bool:
        return bool(np.all(sinr_all(self.h_s, w, self.rho) >= self.floor))

    def objective(self, w: ComplexArray) -> float:
        return float(np.real(np.sum(w.conj() * (self.gram @ w)))) / self.scale

    def margins(self, w: ComplexArray) -> RealArray:
        return sinr_all(self.h_s, w, self.rho) / self.gamma - 1.0

    def penalized(self, w: ComplexArray, weight: float, band: float) -> float:
        shortfall = np.minimum(self.margins(w) - band, 0.0)
        return self.objective(w) - weight * float(np.sum(shortfall**2))

    def ascent_direction(self, w: ComplexArray, weight: float, band: float) -> ComplexArray:
        """Wirtinger gradient of the penalized objective with respect to ``conj(w)``."""
        direction = self.gram @ w / self.scale
        hw = self.h_s @ w
        power = self.rho * np.abs(hw) ** 2
        users = np.arange(self.h_s.shape[0])
        signal = power[users, users]
        interference = 1.0 + power.sum(axis=1) - signal
        shortfall = np.minimum(signal / interference / self.gamma - 1.0 - band, 0.0)
        if not np.any(shortfall):
            return direction
        # d(SINR_k)/d(conj w_i): own beam raises the signal, the others raise interference.
        coefficient = -(signal / interference**2)[:, None] * np.ones_like(power)
        coefficient[users, users] = 1.0 / interference
        weights = (2 * weight * shortfall / self.gamma)[:, None] * self.rho * coefficient * hw
        return direction - self.h_s.conj().T @ weights


def _normalize_columns(w: ComplexArray) -> ComplexArray | None:
    norms = np.linalg.norm(w, axis=0)
    if not np.all(norms > 0):
        return None
    return w / norms


def _pull_back(problem: _Problem, anchor: ComplexArray, candidate: ComplexArray, steps: int) -> ComplexArray:
    """Feasible point on the normalized chord from a feasible ``anchor`` toward ``candidate``."""
    if problem.feasible(candidate):
        return candidate
    low, high, best = 0.0, 1.0, anchor
    for _ in range(steps):
        middle = (low + high) / 2
        point = _normalize_columns((1 - middle) * anchor + middle * candidate)
        if point is not None and problem.feasible(point):
            low, best = middle, point
        else:
            high = middle
    return best


def _ascend(problem: _Problem, start: ComplexArray, cfg: OracleConfig) -> ComplexArray:
    w = start
    for stage in range(cfg.stages):
        weight = cfg.penalty_start * cfg.penalty_growth**stage
        band = cfg.margin_buffer / weight
        step = cfg.step_size
        value = problem.penalized(w, weight, band)
        for _ in range(cfg.steps):
            direction = problem.ascent_direction(w, weight, band)
            norm = np.linalg.norm(direction)
            if not norm > 0:
                break
            moved = _normalize_columns(w + step * direction / norm)
            candidate = None if moved is None else _pull_back(problem, w, moved, cfg.bisection_steps)
            candidate_value = -np.inf if candidate is None else problem.penalized(candidate, weight, band)
            if candidate is not None and candidate_value > value:
                w, value = candidate, candidate_value
                step = min(step * cfg.step_growth, cfg.step_size)
            else:
                step *= cfg.step_decay
                if step < cfg.min_step:
                    break
    return w


def _restart_points(
    problem: _Problem, w_zf: ComplexArray, warm_starts: Sequence[ComplexArray], cfg: OracleConfig
) -> list[ComplexArray]:
    starts = [w_zf]
    for index, warm in enumerate(warm_starts):
        warm = np.asarray(warm, dtype=np.complex128)[:, : w_zf.shape[1]]
        if warm.shape == w_zf.shape and problem.feasible(warm):
            starts.append(warm)
        else:
            logger.warning(f"Discarding infeasible warm start {index}")
    for restart in range(1, cfg.restarts):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(restart,)))
        noise = rng.standard_normal(w_zf.shape) + 1j * rng.standard_normal(w_zf.shape)
        moved = _normalize_columns(w_zf + cfg.perturbation * noise / np.sqrt(2 * w_zf.shape[0]))
        starts.append(w_zf if moved is None else _pull_back(problem, w_zf, moved, cfg.bisection_steps))
    return starts


def oracle_solve(
    h_s: ComplexArray,
    g: ComplexArray,
    rho: float,
    mu: float,
    cfg: OracleConfig,
    warm_starts: Sequence[ComplexArray] = (),
    zeta: float = 1.0,
) -> OracleResult:
    """Best feasible beams found over ZF, the warm starts and ``cfg.restarts - 1`` perturbed ZF starts.

    Every start is feasible, so the result is at least as good as the best feasible warm
    start. Raises ``OracleError`` when even ZF is infeasible, i.e. ``mu > 1``.
    """
    h_s = np.atleast_2d(np.asarray(h_s, dtype=np.complex128))
    g = np.atleast_2d(np.asarray(g, dtype=np.complex128))
    zf = zf_beamformers(h_s, rho)
    problem = _Problem(h_s, g, rho, mu * zf.sinr_zf, NUMERIC.feasibility_tol)
    if not problem.feasible(zf.w):
        logger.error(f"ZF start violates the SINR targets for mu={mu}")
        raise OracleError(f"no feasible beamformer: ZF start infeasible for mu={mu}")

    best_w, best_value = zf.w, problem.objective(zf.w)
    trace: list[float] = []
    feasible_restarts = 0
    for start in _restart_points(problem, zf.w, warm_starts, cfg):
        w = _ascend(problem, start, cfg)
        if not problem.feasible(w):
            logger.warning("Discarding an infeasible oracle restart")
            continue
        feasible_restarts += 1
        # Starts compete too: the penalized ascent can lower the objective.
        for candidate in (start, w):
            value = problem.objective(candidate)
            if value > best_value:
                best_w, best_value = candidate, value
        trace.append(harvested_energy(g, best_w, rho, zeta))

    logger.debug(f"Oracle kept {feasible_restarts} feasible restarts, best normalized value {best_value:.6g}")
    return OracleResult(
        w=best_w,
        eh_value=harvested_energy(g, best_w, rho, zeta),
        best_trace=tuple(trace),
        feasible_restarts=feasible_restarts,
    )
