"""Joint information and energy beamforming.

Beams start from ZF and are steered one at a time along geodesics toward the current
optimal energy direction while every selected user keeps ``SINR > mu * SINR_ZF``. Users
that block a step become boundary users, and the energy direction is then moved into
the null space of their channels.
"""

import logging
from dataclasses import replace

import numpy as np
import scipy.linalg

from app.metrics_service import sinr_all
from app.models import AlgorithmState, BeamformerVariant, ComplexArray, JointBeamformers, RealArray, SimConfig
from app.numerics import NUMERIC, NumericError, fix_phase, gram_ellipsoid, normalize, project_out, row_null_space
from app.scheduler_service import zf_beamformers

logger = logging.getLogger(__name__)


def eh_direction(g: ComplexArray) -> ComplexArray:
    """Top eigenvector of ``G^H G``, the beam maximizing the harvested energy."""
    g = np.atleast_2d(np.asarray(g, dtype=np.complex128))
    if not np.any(g):
        raise NumericError("zero EH channel matrix has no energy direction")
    return gram_ellipsoid(g).top_eigenvector


def g_eh(g: ComplexArray, w: ComplexArray) -> float:
    """Normalized harvested energy ``w^H G^H G w`` of a unit beam."""
    return float(np.sum(np.abs(np.atleast_2d(g) @ w) ** 2))


def geodesic_cap(w_target: ComplexArray, w_base: ComplexArray) -> float:
    """Angle between two unit beams, ignoring their relative phase."""
    return float(np.arccos(min(1.0, abs(np.vdot(w_target, w_base)))))


def eh_gradient(g: ComplexArray, w_eh: ComplexArray, w_i: ComplexArray) -> float:
    """Energy gained per radian by steering ``w_i`` onto ``w_eh``, clamped at zero."""
    if abs(np.vdot(w_eh, w_i)) >= 1 - NUMERIC.zero_angle_tol:
        return 0.0
    gradient = (g_eh(g, w_eh) - g_eh(g, w_i)) / geodesic_cap(w_eh, w_i)
    return max(gradient, 0.0)


def steer(w_base: ComplexArray, w_target: ComplexArray, theta: float) -> ComplexArray:
    """Rotate ``w_base`` by ``theta`` along the great circle toward ``w_target``.

    The target is first phase-aligned with the base so the endpoint at the cap angle is
    the target itself up to a unit phase. ``theta`` is clamped to ``[0, cap]``.
    """
    inner = np.vdot(w_base, w_target)
    magnitude = abs(inner)
    theta = float(np.clip(theta, 0.0, np.arccos(min(1.0, magnitude))))
    if theta == 0.0:
        return w_base.copy()
    aligned = w_target * (np.conj(inner) / magnitude) if magnitude > 0 else w_target
    perpendicular = aligned - magnitude * w_base
    norm = np.linalg.norm(perpendicular)
    if norm <= NUMERIC.degenerate_tol:
        raise NumericError("steering target is parallel to the beam")
    steered = np.cos(theta) * w_base + np.sin(theta) * (perpendicular / norm)
    return steered / np.linalg.norm(steered)


def update_eh_direction(g: ComplexArray, boundary_rows: ComplexArray) -> ComplexArray:
    """Energy direction restricted to the null space of the boundary users' channels."""
    g = np.atleast_2d(np.asarray(g, dtype=np.complex128))
    m = g.shape[1]
    boundary_rows = np.asarray(boundary_rows, dtype=np.complex128).reshape(-1, m)
    if boundary_rows.shape[0] == 0:
        return eh_direction(g)
    if boundary_rows.shape[0] >= m:
        raise NumericError(f"null space exhausted: {boundary_rows.shape[0]} boundary users in dimension {m}")
    null = row_null_space(boundary_rows).basis
    return eh_direction(g @ null @ null.conj().T)


def update_eh_direction_reduced(w_eh_prev: ComplexArray, h_b: ComplexArray) -> ComplexArray:
    """Projection update that replaces the eigendecomposition of the reduced variant."""
    projected = project_out(w_eh_prev, normalize(h_b))
    norm = np.linalg.norm(projected)
    if norm <= NUMERIC.degenerate_tol:
        raise NumericError("degenerate projection: energy direction parallel to the boundary channel")
    return projected / norm


def _steer_beam(
    h_s: ComplexArray,
    g: ComplexArray,
    w: ComplexArray,
    b: int,
    w_eh: ComplexArray,
    gamma: RealArray,
    rho: float,
    delta_d: float,
) -> tuple[ComplexArray, float, list[int], list[float]]:
    """Steer beam ``b`` in ``delta_d`` increments while every SINR stays above target.

    A step that violates a constraint is not taken and its violators are returned; a step
    that would lower the beam's energy ends the steering. Returns the new beam, the
    angle covered, the violators and the beam energy after each accepted step.
    """
    base = w[:, b].copy()
    cap = geodesic_cap(w_eh, base)
    beam, theta, energy = base, 0.0, g_eh(g, base)
    trial = w.copy()
    sinr = sinr_all(h_s, w, rho)
    accepted: list[float] = []
    while np.all(sinr > gamma) and theta < cap:
        next_theta = min(theta + delta_d, cap)
        candidate = steer(base, w_eh, next_theta)
        trial[:, b] = candidate
        trial_sinr = sinr_all(h_s, trial, rho)
        violators = np.flatnonzero(trial_sinr < gamma)
        if violators.size:
            return beam, theta, violators.tolist(), accepted
        candidate_energy = g_eh(g, candidate)
        if candidate_energy < energy:
            break
        beam, theta, sinr, energy = candidate, next_theta, trial_sinr, candidate_energy
        accepted.append(energy)
    return beam, theta, [], accepted


def joint_beamform(
    h_s: ComplexArray,
    g: ComplexArray,
    cfg: SimConfig,
    variant: BeamformerVariant = BeamformerVariant.FULL,
    mu: float | None = None,
) -> JointBeamformers:
    """Joint information and energy beamforming for the selected users ``h_s``.

    Parameters
    ----------
    h_s : ComplexArray
        Channels of the selected ID users, one row per user, full row rank.
    g : ComplexArray
        EH users' channels.
    cfg : SimConfig
        Supplies the SNR, the unit steering angle, ``zeta`` and the default ``mu``.
    variant : BeamformerVariant
        ``FULL`` recomputes the energy direction by eigendecomposition in the boundary
        null space, ``REDUCED`` uses the projection update.
    mu : float, optional
        Target SINR ratio overriding ``cfg.mu``; must lie in (0, 1].

    Returns
    -------
    JointBeamformers
        Beams meeting ``SINR_i >= mu * SINR_i^ZF`` for every user.
    """
    mu = cfg.mu if mu is None else mu
    if not 0 < mu <= 1:
        raise NumericError(f"target SINR ratio {mu} is infeasible; ZF attains at most ratio 1")
    h_s = np.atleast_2d(np.asarray(h_s, dtype=np.complex128))
    g = np.atleast_2d(np.asarray(g, dtype=np.complex128))
    users, m = h_s.shape
    rho = cfg.effective_snr / users
    zf = zf_beamformers(h_s, rho)
    gamma = mu * zf.sinr_zf

    w = zf.w.copy()
    beam_energy = np.array([g_eh(g, w[:, i]) for i in range(users)])
    energy_trace = [cfg.zeta * rho * float(beam_energy.sum())]
    angles = np.zeros(users)
    steering: list[list[float]] = [[] for _ in range(users)]
    state = AlgorithmState(t=1, r=users, w_eh=eh_direction(g))

    while True:
        state.gradients = np.array([eh_gradient(g, state.w_eh, w[:, i]) for i in range(users)])
        added: list[int] = []
        while np.any(state.gradients > 0):
            b = int(np.argmax(state.gradients))
            beam, theta, violators, accepted = _steer_beam(h_s, g, w, b, state.w_eh, gamma, rho, cfg.delta_d)
            w[:, b] = beam
            for energy in accepted:
                beam_energy[b] = energy
                energy_trace.append(cfg.zeta * rho * float(beam_energy.sum()))
            angles[b] += theta
            steering[b].append(float(angles[b]))
            for user in violators:
                if user not in state.boundary:
                    state.boundary.append(user)
                    added.append(user)
            state.gradients[b] = 0.0

        state.r -= 1
        if state.r == 0:
            break
        if not added:
            logger.debug(f"No new boundary user in iteration {state.t}; stopping early")
            break
        if len(state.boundary) >= m:
            logger.debug(f"Boundary users span all {m} dimensions after iteration {state.t}")
            break
        match variant:
            case BeamformerVariant.FULL:
                state.w_eh = update_eh_direction(g, h_s[state.boundary])
            case BeamformerVariant.REDUCED:
                for user in added:
                    state.w_eh = update_eh_direction_reduced(state.w_eh, h_s[user])
        state.t += 1

    return JointBeamformers(
        w=w,
        rho=rho,
        gamma=gamma,
        sinr=sinr_all(h_s, w, rho),
        sinr_zf=zf.sinr_zf,
        w_zf=zf.w,
        variant=variant,
        iterations_used=state.t,
        steering_log=tuple(tuple(log) for log in steering),
        boundary=tuple(state.boundary),
        w_eh=state.w_eh,
        energy_trace=tuple(energy_trace),
    )


def add_dedicated_eh_beam(beams: JointBeamformers, h_s: ComplexArray, g: ComplexArray) -> JointBeamformers:
    """Append the best energy beam that causes no interference to the selected users.

    Power is re-split equally across the ``|S| + 1`` beams, so targets and ZF references
    scale with the new per-beam power.
    """
    h_s = np.atleast_2d(np.asarray(h_s, dtype=np.complex128))
    users, m = h_s.shape
    if users >= m:
        raise NumericError(f"no spare dimension for a dedicated EH beam: {users} users on {m} antennas")
    null = row_null_space(h_s).basis
    _, _, vh = scipy.linalg.svd(np.atleast_2d(g) @ null)
    dedicated = fix_phase(normalize(null @ vh[0].conj()))

    scale = users / (users + 1)
    rho = beams.rho * scale
    w = np.column_stack([beams.w, dedicated])
    return replace(
        beams,
        w=w,
        rho=rho,
        gamma=beams.gamma * scale,
        sinr=sinr_all(h_s, w, rho),
        sinr_zf=beams.sinr_zf * scale,
        energy_trace=(),
    )
