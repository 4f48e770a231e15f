"""Complex linear-algebra primitives shared by the beamforming services.

Channels are row vectors (``h`` is 1xM, stacked into KxM matrices) and beams are
column vectors (``w`` is Mx1, stacked into MxS matrices), so ``h @ w`` is the
received amplitude.
"""

import logging

import numpy as np
import scipy.linalg

from app.models import ComplexArray, EllipsoidDecomposition, NullSpaceBasis, NumericSettings

logger = logging.getLogger(__name__)

NUMERIC = NumericSettings()


class NumericError(ValueError):
    """A linear-algebra precondition does not hold."""


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{what} has non-finite entries")


def fix_phase(vectors: ComplexArray) -> ComplexArray:
    """Rotate every column so its first largest-magnitude component is real nonnegative."""
    vectors = np.array(vectors, dtype=np.complex128)
    if vectors.ndim == 1:
        return fix_phase(vectors[:, None])[:, 0]
    pivots = np.argmax(np.abs(vectors), axis=0)
    anchors = vectors[pivots, np.arange(vectors.shape[1])]
    magnitudes = np.abs(anchors)
    phases = np.ones_like(anchors)
    nonzero = magnitudes > 0
    phases[nonzero] = anchors[nonzero] / magnitudes[nonzero]
    return vectors / phases


def hermitian_eig(a: ComplexArray, settings: NumericSettings = NUMERIC) -> EllipsoidDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    a : ComplexArray
        Square matrix, Hermitian within ``settings.hermitian_rtol`` relative tolerance.
    settings : NumericSettings
        Tolerances.

    Returns
    -------
    EllipsoidDecomposition
        Eigenvalues in ascending order, unit eigenvectors in the columns with the
        deterministic phase of :func:`fix_phase`, and the numerical rank.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.size == 0:
        raise NumericError(f"expected a nonempty square matrix, got shape {a.shape}")
    _check_finite(a, "matrix")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.conj().T) > settings.hermitian_rtol * max(scale, np.finfo(float).tiny):
        raise NumericError("not Hermitian")

    eigenvalues, eigenvectors = scipy.linalg.eigh((a + a.conj().T) / 2)
    largest = np.max(np.abs(eigenvalues))
    rank = int(np.sum(np.abs(eigenvalues) > settings.rank_rtol * largest)) if largest > 0 else 0
    return EllipsoidDecomposition(eigenvalues=eigenvalues, eigenvectors=fix_phase(eigenvectors), rank=rank)


def gram_ellipsoid(g: ComplexArray, settings: NumericSettings = NUMERIC) -> EllipsoidDecomposition:
    """Axes and squared radii of the ellipsoid spanned by ``G^H G``."""
    g = np.atleast_2d(np.asarray(g, dtype=np.complex128))
    decomposition = hermitian_eig(g.conj().T @ g, settings)
    return EllipsoidDecomposition(
        eigenvalues=np.clip(decomposition.eigenvalues, 0.0, None),
        eigenvectors=decomposition.eigenvectors,
        rank=decomposition.rank,
    )


def row_null_space(h: ComplexArray, settings: NumericSettings = NUMERIC) -> NullSpaceBasis:
    """Orthonormal basis N (columns) with ``h @ N = 0``.

    A rank-deficient ``h`` yields the null space of its row span and sets
    ``rank_deficient``.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim == 1:
        h = h[None, :]
    rows, m = h.shape
    if rows >= m:
        raise NumericError(f"no null space: {rows} rows in dimension {m}")
    if rows == 0:
        return NullSpaceBasis(basis=np.eye(m, dtype=np.complex128), rank=0)
    _check_finite(h, "channel matrix")

    _, singular_values, vh = scipy.linalg.svd(h, full_matrices=True)
    tolerance = settings.rank_rtol * singular_values[0]
    rank = int(np.sum(singular_values > tolerance))
    deficient = rank < rows
    if deficient:
        logger.warning(f"Row space has rank {rank} < {rows}; using null space of dimension {m - rank}")
    return NullSpaceBasis(basis=vh[rank:].conj().T, rank=rank, rank_deficient=deficient)


def pseudo_inverse(h: ComplexArray) -> ComplexArray:
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim == 1:
        h = h[None, :]
    _check_finite(h, "matrix")
    if not np.any(h):
        raise NumericError("pseudo-inverse of a zero matrix")
    return scipy.linalg.pinv(h)


def normalize(v: ComplexArray) -> ComplexArray:
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise NumericError("cannot normalize a zero vector")
    return np.asarray(v, dtype=np.complex128) / norm


def normalize_columns(w: ComplexArray) -> ComplexArray:
    norms = np.linalg.norm(w, axis=0)
    if not np.all(norms > 0):
        raise NumericError("cannot normalize a zero column")
    return np.asarray(w, dtype=np.complex128) / norms


def project_out(w: ComplexArray, direction: ComplexArray) -> ComplexArray:
    """Remove from column vector ``w`` its component along row direction ``direction`` (unit)."""
    return w - direction.conj() * (direction @ w)
