"""Synthetic completion and robust PCA instances.

Completion: ``O = U V + G`` with ``U`` (m x k), ``V`` (k x m) standard
normal and ``G`` Gaussian noise; ``round(2 m k ln m)`` entries are
observed, half of them kept for training and half for validation.

RPCA: ``O = U V + Ytrue + G`` with ``k = 0.01 m`` and 1% of the entries
corrupted by ``+-5 ||U V||_inf``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import SparseCoo
from ..problems import CompletionProblem, RpcaProblem

__all__ = [
    "SynthCompletionTruth",
    "SynthRpcaTruth",
    "n_observed",
    "gen_synth_completion",
    "gen_synth_rpca",
]


def n_observed(m: int, k: int) -> int:
    """``round(2 m k ln m)``."""
    return int(round(2.0 * m * k * np.log(m)))


@dataclass(eq=False)
class SynthCompletionTruth:
    U: np.ndarray
    V: np.ndarray
    G: np.ndarray
    omega: SparseCoo  # every observed entry (train and validation), values from O
    noise_std: float

    @property
    def low_rank(self) -> np.ndarray:
        return self.U @ self.V

    @property
    def observed_fraction(self) -> float:
        m, n = self.omega.shape
        return self.omega.nnz / (m * n)

    def test_entries(self) -> SparseCoo:
        """Noise-free ``U V`` on every unobserved entry."""
        m, n = self.omega.shape
        mask = np.ones((m, n), dtype=bool)
        mask[self.omega.rows, self.omega.cols] = False
        rows, cols = np.nonzero(mask)
        return SparseCoo(rows, cols, self.low_rank[rows, cols], (m, n))


@dataclass(eq=False)
class SynthRpcaTruth:
    U: np.ndarray
    V: np.ndarray
    Y: np.ndarray  # sparse corruption, stored dense
    G: np.ndarray
    noise_std: float

    @property
    def low_rank(self) -> np.ndarray:
        return self.U @ self.V

    @property
    def k(self) -> int:
        return self.U.shape[1]


def _subset(rows, cols, O, shape):
    return SparseCoo.from_triplets(rows, cols, O[rows, cols], shape)


def gen_synth_completion(m: int, k: int, seed: int = 0, noise_std: float = 0.1):
    """Return ``(train, valid, truth)`` for an m x m completion instance.

    ``train`` and ``valid`` are :class:`CompletionProblem` objects built
    from the two halves of the observed entries.
    """
    if not m >= k >= 1:
        raise ValueError("need m >= k >= 1")
    n_obs = n_observed(m, k)
    if n_obs > m * m:
        raise ValueError(f"{n_obs} observations requested but the matrix has {m * m} entries")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((m, k))
    V = rng.standard_normal((k, m))
    G = noise_std * rng.standard_normal((m, m))
    O = U @ V + G
    flat = rng.choice(m * m, size=n_obs, replace=False)
    rows, cols = np.divmod(flat, m)
    half = n_obs // 2
    train = _subset(rows[:half], cols[:half], O, (m, m))
    valid = _subset(rows[half:], cols[half:], O, (m, m))
    omega = _subset(rows, cols, O, (m, m))
    truth = SynthCompletionTruth(U, V, G, omega, noise_std)
    return CompletionProblem(train), CompletionProblem(valid), truth


def gen_synth_rpca(m: int, seed: int = 0, noise_std: float = 0.1):
    """Return ``(problem, truth)`` for an m x m robust PCA instance."""
    if m < 100:
        raise ValueError("m must be at least 100")
    k = max(1, int(round(0.01 * m)))
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((m, k))
    V = rng.standard_normal((k, m))
    L = U @ V
    n_bad = int(round(0.01 * m * m))
    flat = rng.choice(m * m, size=n_bad, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=n_bad)
    Y = np.zeros((m, m))
    Y.flat[flat] = 5.0 * np.abs(L).max() * signs
    G = noise_std * rng.standard_normal((m, m))
    return RpcaProblem(L + Y + G), SynthRpcaTruth(U, V, Y, G, noise_std)
