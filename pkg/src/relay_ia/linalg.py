"""
Complex linear-algebra helpers shared by every alignment scheme.

All decompositions go through the SVD so that rank, null space and the
least-norm solution use one consistent notion of "numerically zero": a
singular value is discarded when it is not larger than ``rel_threshold``
times the largest singular value of the matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned

DEFAULT_REL_THRESHOLD = 1e-8


@dataclass(frozen=True)
class RankResult:
    """Outcome of a thresholded rank computation.

    Attributes
    ----------
    rank : int
        Number of singular values strictly above ``threshold_used``.
    singular_values : numpy.ndarray
        All singular values, nonincreasing.
    threshold_used : float
        Absolute cut-off, i.e. ``rel_threshold * max(singular_values)``.
    """

    rank: int
    singular_values: np.ndarray
    threshold_used: float


def as_complex_matrix(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim == 1:
        H = H[np.newaxis, :]
    if H.ndim != 2:
        raise ValueError(f"expected a matrix, got array with shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    return H


def singular_values(H) -> np.ndarray:
    H = as_complex_matrix(H)
    if H.size == 0:
        return np.zeros(0)
    return np.linalg.svd(H, compute_uv=False)


def rank_eps(H, rel_threshold: float = DEFAULT_REL_THRESHOLD) -> RankResult:
    """Rank of ``H`` counting singular values above ``rel_threshold * s_max``."""
    if not 0.0 < rel_threshold < 1.0:
        raise ValueError("rel_threshold must lie in (0, 1)")
    s = singular_values(H)
    threshold = float(rel_threshold * s[0]) if s.size else 0.0
    return RankResult(
        rank=int(np.count_nonzero(s > threshold)),
        singular_values=s,
        threshold_used=threshold,
    )


def null_space_basis(H, rel_threshold: float = DEFAULT_REL_THRESHOLD) -> np.ndarray:
    """Orthonormal basis of ``{x : H x = 0}``.

    Returns
    -------
    numpy.ndarray
        Array of shape ``(H.shape[1], k)``; column ``j`` is the ``j``-th
        basis vector. ``k == 0`` when the null space is trivial.
    """
    H = as_complex_matrix(H)
    n = H.shape[1]
    if H.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(H, full_matrices=True)
    threshold = rel_threshold * s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > threshold))
    return vh[rank:].conj().T


def least_norm_solve(H, b, rel_threshold: float = DEFAULT_REL_THRESHOLD) -> np.ndarray:
    """Minimum-norm ``u`` with ``H u = b`` for a full-row-rank ``H``.

    Square systems take the same path and return the exact solution.

    Raises
    ------
    IllConditioned
        If ``H`` has more rows than columns or its smallest singular value
        is at most ``rel_threshold`` times the largest.
    """
    H = as_complex_matrix(H)
    b = np.asarray(b, dtype=complex).reshape(-1)
    rows, cols = H.shape
    if b.shape[0] != rows:
        raise ValueError(f"b has length {b.shape[0]}, H has {rows} rows")
    if rows == 0:
        return np.zeros(cols, dtype=complex)
    if rows > cols:
        raise IllConditioned(f"{rows}x{cols} system cannot have full row rank")
    u_left, s, vh = np.linalg.svd(H, full_matrices=False)
    if not s[-1] > rel_threshold * s[0]:
        raise IllConditioned(
            f"row rank test failed: s_min/s_max = {s[-1] / s[0] if s[0] else 0.0:.3e}"
        )
    return vh.conj().T @ ((u_left.conj().T @ b) / s)
