"""Matrix completion and robust PCA objectives.

Both smooth losses have a 1-Lipschitz gradient (blockwise for RPCA), so
``rho = 1`` for each.
"""

from __future__ import annotations

import numpy as np

from .linalg import LowRankFactors, SparseCoo, SplrMatrix
from .regularizers import RegularizerSpec, matrix_penalty

__all__ = [
    "CompletionProblem",
    "RpcaProblem",
    "mc_objective",
    "mc_iterate_splr",
    "rpca_block_objectives",
]


class CompletionProblem:
    """Recover a low-rank matrix from the observed entries ``observed``.

    The smooth loss is ``0.5 * sum_{(i,j) in Omega} (X_ij - O_ij)**2``.
    """

    rho = 1.0

    def __init__(self, observed: SparseCoo):
        if observed.nnz == 0:
            raise ValueError("a completion problem needs at least one observation")
        self.observed = observed
        self._cache = (None, None)

    @property
    def shape(self):
        return self.observed.shape

    def residual(self, X: LowRankFactors) -> SparseCoo:
        """``S_Omega(X - O)`` with exactly the observation pattern."""
        # factors are immutable, so the last residual can be reused by identity
        last_X, last_r = self._cache
        if X is last_X:
            return last_r
        obs = self.observed
        r = obs.with_values(X.entries(obs.rows, obs.cols) - obs.vals)
        self._cache = (X, r)
        return r

    def loss(self, X: LowRankFactors) -> float:
        r = self.residual(X).vals
        return 0.5 * float(r @ r)

    def objective(self, X: LowRankFactors, reg: RegularizerSpec, lam: float, tau: float = 1.0) -> float:
        return mc_objective(X, self, reg, lam, tau)

    def iterate_map(self, X: LowRankFactors, tau: float) -> SplrMatrix:
        return mc_iterate_splr(X, self, tau)


def _reg_term(X, reg, lam, tau):
    return matrix_penalty(reg, X.d, lam, tau) if X.rank else 0.0


def mc_objective(X: LowRankFactors, prob: CompletionProblem, reg: RegularizerSpec, lambda_t: float, tau: float = 1.0) -> float:
    """Completion objective evaluated from the factors of ``X``.

    ``tau`` only matters for SCAD and MCP, whose knots scale with the
    proximal weight ``lambda_t / tau``.
    """
    if X.shape != prob.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {prob.shape}")
    return prob.loss(X) + _reg_term(X, reg, lambda_t, tau)


def mc_iterate_splr(X: LowRankFactors, prob: CompletionProblem, tau: float) -> SplrMatrix:
    """``X - (1/tau) S_Omega(X - O)`` as a sparse-plus-low-rank matrix."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return SplrMatrix(X, prob.residual(X), a=1.0, b=-1.0 / tau)


class RpcaProblem:
    """Split a dense ``O`` into low-rank ``X`` plus sparse ``Y``.

    The smooth loss is ``0.5 * ||X + Y - O||_F**2``.
    """

    rho = 1.0

    def __init__(self, O):
        O = np.asarray(O, dtype=float)
        if O.ndim != 2 or not np.all(np.isfinite(O)):
            raise ValueError("O must be a finite 2-d array")
        self.O = O

    @property
    def shape(self):
        return self.O.shape

    def loss(self, X_dense, Y) -> float:
        R = X_dense + Y - self.O
        return 0.5 * float(np.vdot(R, R))


def rpca_block_objectives(X: LowRankFactors, Y, prob: RpcaProblem, reg: RegularizerSpec, lambda_t: float, beta: float, tau: float = 1.0):
    """Return ``(F, F_Y(X), F_X(Y))``.

    ``F_Y(X) = f + lambda_t r(X)`` and ``F_X(Y) = f + beta ||Y||_1`` are the
    partial objectives used by the blockwise sufficient-decrease tests.
    ``Y`` may be dense or a :class:`SparseCoo`.
    """
    if X.shape != prob.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {prob.shape}")
    Y = Y.to_dense() if isinstance(Y, SparseCoo) else np.asarray(Y, dtype=float)
    f = prob.loss(X.to_dense(), Y)
    rx = _reg_term(X, reg, lambda_t, tau)
    ry = beta * float(np.abs(Y).sum())
    return f + rx + ry, f + rx, f + ry
