"""Per-trial performance metrics: SINR with interference, harvested energy, sum rate."""

from math import log

import numpy as np

from app.models import ComplexArray, RealArray

LN2 = log(2.0)


def _beam_powers(rho: float | RealArray, beams: int) -> RealArray:
    powers = np.broadcast_to(np.asarray(rho, dtype=np.float64), (beams,))
    if np.any(powers < 0):
        raise ValueError("beam powers must be nonnegative")
    return powers


def sinr_all(h_s: ComplexArray, w: ComplexArray, rho: float | RealArray) -> RealArray:
    """SINR of every selected user under unit-variance noise.

    Row ``k`` of ``h_s`` is served by column ``k`` of ``w``; columns beyond the number of
    users (a dedicated energy beam) only add interference.
    """
    h_s = np.atleast_2d(h_s)
    w = np.asarray(w).reshape(h_s.shape[1], -1)
    users = h_s.shape[0]
    if w.shape[1] < users:
        raise ValueError(f"{users} users need at least {users} beams, got {w.shape[1]}")
    gains = _beam_powers(rho, w.shape[1]) * np.abs(h_s @ w) ** 2
    diagonal = np.arange(users)
    signal = gains[diagonal, diagonal]
    cross = gains.copy()
    cross[diagonal, diagonal] = 0.0
    return signal / (1.0 + cross.sum(axis=1))


def harvested_energy(g: ComplexArray, w: ComplexArray, rho: float | RealArray, zeta: float = 1.0) -> float:
    """Total energy ``zeta * sum_i rho_i ||G w_i||^2`` collected by all EH users."""
    g = np.atleast_2d(g)
    w = np.asarray(w).reshape(g.shape[1], -1)
    per_beam = np.sum(np.abs(g @ w) ** 2, axis=0)
    return float(zeta * np.sum(_beam_powers(rho, w.shape[1]) * per_beam))


def sum_rate(sinrs: RealArray) -> float:
    """Sum of ``ln(1 + SINR)`` in nats."""
    sinrs = np.asarray(sinrs, dtype=np.float64)
    if np.any(sinrs < 0):
        raise ValueError("SINR values must be nonnegative")
    return float(np.sum(np.log1p(sinrs)))


def nats_to_bits(value: float) -> float:
    return value / LN2


def steering_cos2(w_zf: ComplexArray, w: ComplexArray) -> RealArray:
    """``|w_k^ZF^H w_k|^2`` per beam: how far each beam left its ZF start."""
    users = w_zf.shape[1]
    return np.abs(np.sum(w_zf.conj() * w[:, :users], axis=0)) ** 2


def sinr_gap_db(sinr: RealArray, gamma: RealArray) -> RealArray:
    return 10 * np.log10(np.asarray(sinr) / np.asarray(gamma))
