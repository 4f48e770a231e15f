"""Semi-orthogonal user selection and zero-forcing beamformers."""

import logging

import numpy as np
import scipy.linalg

from app.metrics_service import sinr_all
from app.models import ComplexArray, UserSelection, ZfBeamformers
from app.numerics import NUMERIC, NumericError, normalize_columns, pseudo_inverse

logger = logging.getLogger(__name__)


def sinr_candidate_proxy(h: ComplexArray, selected_rows: ComplexArray, rho: float = 1.0) -> float:
    """ZF SINR the candidate ``h`` would get if added to the selected users.

    Equals ``rho * ||(I - P) h^H||^2`` with ``P`` the projector onto the span of the
    selected channels.
    """
    h = np.asarray(h, dtype=np.complex128)
    selected_rows = np.asarray(selected_rows, dtype=np.complex128).reshape(-1, h.size)
    residual = h.conj()
    if selected_rows.shape[0]:
        basis = scipy.linalg.orth(selected_rows.conj().T)
        residual = residual - basis @ (basis.conj().T @ residual)
    return float(rho * np.sum(np.abs(residual) ** 2))


def sus_select(h: ComplexArray, epsilon: float, m: int, rho: float = 1.0) -> UserSelection:
    """Greedy semi-orthogonal user selection.

    The first pick is the strongest user; each later pick maximizes the ZF SINR proxy
    inside the candidate set, which keeps only users whose direction correlation with
    every earlier pick is at most ``epsilon``. Ties go to the lowest user index.
    """
    h = np.atleast_2d(np.asarray(h, dtype=np.complex128))
    if h.shape[0] < 1:
        raise ValueError("user selection needs at least one ID user")
    directions = h / np.linalg.norm(h, axis=1, keepdims=True)

    candidates = np.arange(h.shape[0])
    selected: list[int] = []
    sizes: list[int] = []
    while candidates.size and len(selected) < m:
        sizes.append(int(candidates.size))
        picked = h[np.asarray(selected, dtype=int)]
        scores = [sinr_candidate_proxy(h[k], picked, rho) for k in candidates]
        best = int(candidates[int(np.argmax(scores))])
        selected.append(best)
        correlation = np.abs(directions[candidates] @ directions[best].conj())
        candidates = candidates[(correlation <= epsilon) & (candidates != best)]

    logger.debug(f"SUS picked {selected} from candidate sets {sizes}")
    return UserSelection(indices=tuple(selected), epsilon=epsilon, candidate_sizes=tuple(sizes))


def zf_beamformers(h_s: ComplexArray, rho: float) -> ZfBeamformers:
    """Unit-norm columns of the pseudo-inverse of the selected channels."""
    h_s = np.atleast_2d(np.asarray(h_s, dtype=np.complex128))
    singular_values = scipy.linalg.svdvals(h_s)
    if singular_values[-1] <= NUMERIC.rank_rtol * singular_values[0] or h_s.shape[0] > h_s.shape[1]:
        raise NumericError(f"rank-deficient channels for ZF: singular values {singular_values}")
    w = normalize_columns(pseudo_inverse(h_s))
    return ZfBeamformers(w=w, sinr_zf=sinr_all(h_s, w, rho), rho=rho)
