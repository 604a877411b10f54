"""Recovery metrics."""

from __future__ import annotations

import math

import numpy as np

from ..linalg import LowRankFactors, SparseCoo

__all__ = [
    "nmse_completion",
    "nmse_rpca",
    "support_accuracy",
    "rank_of",
    "rmse_test",
    "psnr",
    "PERFECT_PSNR",
]

# reported when the two matrices are identical
PERFECT_PSNR = math.inf

_BLOCK_ROWS = 256


def nmse_completion(X: LowRankFactors, truth_low_rank, omega: SparseCoo) -> float:
    """Normalized error of ``X`` against the noise-free matrix, off ``omega``.

    ``truth_low_rank`` is the dense ``U V``; ``X`` is expanded one block of
    rows at a time.
    """
    L = np.asarray(truth_low_rank, dtype=float)
    if X.shape != L.shape or omega.shape != L.shape:
        raise ValueError("dimension mismatch")
    m, n = L.shape
    if omega.nnz >= m * n:
        raise ValueError("omega covers every entry; nothing to evaluate")
    mask = np.ones((m, n), dtype=bool)
    mask[omega.rows, omega.cols] = False
    num = den = 0.0
    US = X.U * X.d
    for lo in range(0, m, _BLOCK_ROWS):
        hi = min(m, lo + _BLOCK_ROWS)
        Lb = L[lo:hi]
        Eb = US[lo:hi] @ X.V.T - Lb
        Mb = mask[lo:hi]
        num += float(np.sum(Eb[Mb] ** 2))
        den += float(np.sum(Lb[Mb] ** 2))
    return math.sqrt(num / den)


def _dense(A):
    if isinstance(A, LowRankFactors) or isinstance(A, SparseCoo):
        return A.to_dense()
    return np.asarray(A, dtype=float)


def nmse_rpca(X, Y, truth) -> float:
    """``||(X + Y) - (U V + Ytrue)||_F / ||U V + Ytrue||_F``."""
    target = truth.low_rank + truth.Y
    return float(np.linalg.norm(_dense(X) + _dense(Y) - target) / np.linalg.norm(target))


def support_accuracy(Y, Y_true) -> float:
    """Fraction of entries where ``Y`` and ``Y_true`` are zero or nonzero together."""
    a = _dense(Y) != 0
    b = _dense(Y_true) != 0
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return float(np.mean(a == b))


def rank_of(X: LowRankFactors) -> int:
    return X.rank


def rmse_test(X: LowRankFactors, test: SparseCoo) -> float:
    """Root mean squared error of ``X`` on the held-out entries."""
    if test.nnz == 0:
        raise ValueError("empty test set")
    r = X.entries(test.rows, test.cols) - test.vals
    return math.sqrt(float(r @ r) / test.nnz)


def psnr(X, O) -> float:
    """``-10 log10(mean squared difference)`` in dB; ``inf`` for identical inputs."""
    X = np.asarray(X, dtype=float)
    O = np.asarray(O, dtype=float)
    if X.shape != O.shape:
        raise ValueError("dimension mismatch")
    mse = float(np.mean((X - O) ** 2))
    return PERFECT_PSNR if mse == 0 else -10.0 * math.log10(mse)
