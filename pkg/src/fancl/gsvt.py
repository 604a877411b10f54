"""Generalized singular value thresholding.

``gsvt_full`` is the reference operator: full SVD, scalar prox on every
singular value.  ``gsvt_reduced`` applies the same operator to the small
projected matrix ``Q^T Z`` and lifts the result back with ``Q``; the two
agree whenever ``span(Q)`` contains the leading left singular vectors of
``Z`` whose singular values exceed the threshold.
"""

from __future__ import annotations

import numpy as np

from .linalg import LowRankFactors, _fix_signs, as_operator, thin_svd
from .regularizers import RegularizerSpec, prox_values

__all__ = ["gsvt_full", "project_svd", "gsvt_reduced"]


def _apply_prox(reg, sigmas, mu):
    exceeds = np.arange(1, sigmas.size + 1) > reg.theta if reg.kind == "tnn" else None
    return prox_values(reg, sigmas, mu, exceeds)


def gsvt_full(Z, reg: RegularizerSpec, mu: float) -> LowRankFactors:
    """Proximal operator of ``mu * r`` at a dense matrix ``Z``."""
    Z = np.asarray(Z, dtype=float)
    m, n = Z.shape
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if not np.any(Z):
        return LowRankFactors.zeros(m, n)
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    y = _apply_prox(reg, s, mu)
    keep = y > 0
    U, V = _fix_signs(U[:, keep], Vt[keep].T)
    return LowRankFactors(U, y[keep], V)


def project_svd(Z, Q: np.ndarray):
    """Thin SVD ``(U_A, s_A, V_A)`` of ``Q^T Z``, computed from ``Z^T Q``."""
    Z = as_operator(Z)
    B = Z.tdot(Q)
    if B.shape[1] <= B.shape[0]:
        return thin_svd(B.T)
    # more basis columns than Z has columns: factor B itself and swap
    V, s, U = thin_svd(B)
    U, V = _fix_signs(U, V)
    return U, s, V


def gsvt_reduced(Z, Q: np.ndarray, reg: RegularizerSpec, mu: float, gamma: float, svd=None):
    """Proximal operator of ``mu * r`` restricted to ``span(Q)``.

    Parameters
    ----------
    Z : matrix-product provider or ndarray
    Q : ndarray, shape (m, k)
        Orthonormal basis of the approximate leading left subspace.
    reg : RegularizerSpec
    mu : float
        Proximal weight.
    gamma : float
        Screening threshold; only singular values of ``Q^T Z`` above it are
        passed to the scalar prox.
    svd : tuple, optional
        Precomputed :func:`project_svd` result, so that callers can derive
        ``gamma`` from it without a second factorization.

    Returns
    -------
    factors : LowRankFactors
        The thresholded matrix, zero outputs dropped.
    V_A : ndarray, shape (n, r)
        All right singular vectors of ``Q^T Z`` (used to restart the power
        method).
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    U_A, s_A, V_A = project_svd(Z, Q) if svd is None else svd
    k_hat = int(np.count_nonzero(s_A > gamma))
    y = _apply_prox(reg, s_A[:k_hat], mu)
    keep = y > 0
    factors = LowRankFactors(Q @ U_A[:, :k_hat][:, keep], y[keep], V_A[:, :k_hat][:, keep])
    return factors, V_A
