"""Matrix kernels: factored low-rank matrices, sparse-plus-low-rank
products, subspace iteration and small dense decompositions.

Anything that can be multiplied as ``Z @ A`` and ``Z.T @ B`` is a
"matrix-product provider": it exposes ``shape``, ``dot(A)`` and
``tdot(B)``.  Dense arrays are wrapped with :func:`as_operator`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MatrixOperator",
    "DenseOperator",
    "as_operator",
    "LowRankFactors",
    "SparseCoo",
    "SplrMatrix",
    "qr_orthonormalize",
    "power_method",
    "thin_svd",
    "splr_mul_right",
    "splr_mul_left",
    "frob_norm_diff_lowrank",
    "basis_deflate",
    "orthonormality_error",
]

# a column is dropped once its residual falls to this fraction of (norm + 1)
QR_DROP_RTOL = 1e-10


class MatrixOperator(Protocol):
    shape: tuple[int, int]

    def dot(self, A: np.ndarray) -> np.ndarray: ...

    def tdot(self, B: np.ndarray) -> np.ndarray: ...


class DenseOperator:
    """Matrix-product provider backed by a dense array."""

    def __init__(self, Z):
        self.Z = np.asarray(Z, dtype=float)
        if self.Z.ndim != 2:
            raise ValueError("expected a 2-d array")
        self.shape = self.Z.shape

    def dot(self, A):
        return self.Z @ A

    def tdot(self, B):
        return self.Z.T @ B

    def to_dense(self):
        return self.Z


def as_operator(Z) -> MatrixOperator:
    if hasattr(Z, "dot") and hasattr(Z, "tdot"):
        return Z
    return DenseOperator(Z)


def orthonormality_error(Q: np.ndarray) -> float:
    """``||Q^T Q - I||_F``."""
    k = Q.shape[1]
    return float(np.linalg.norm(Q.T @ Q - np.eye(k)))


@dataclass(frozen=True, eq=False)
class LowRankFactors:
    """``U @ diag(d) @ V.T`` with orthonormal ``U``, ``V`` and positive,
    nonincreasing ``d``.  Rank 0 encodes the zero matrix."""

    U: np.ndarray
    d: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U, d, V = (np.asarray(a, dtype=float) for a in (self.U, self.d, self.V))
        if U.ndim != 2 or V.ndim != 2 or d.ndim != 1:
            raise ValueError("U, V must be 2-d and d 1-d")
        if not (U.shape[1] == V.shape[1] == d.size):
            raise ValueError(f"inconsistent factor ranks {U.shape}, {d.shape}, {V.shape}")
        if d.size and (np.any(d <= 0) or np.any(np.diff(d) > 0) or not np.all(np.isfinite(d))):
            raise ValueError("d must be positive, finite and nonincreasing")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "V", V)

    @classmethod
    def zeros(cls, m: int, n: int) -> "LowRankFactors":
        return cls(np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[0], self.V.shape[0])

    @property
    def rank(self) -> int:
        return self.d.size

    def to_dense(self) -> np.ndarray:
        return (self.U * self.d) @ self.V.T

    def entries(self, rows, cols) -> np.ndarray:
        """``X[rows[i], cols[i]]`` without forming ``X``."""
        if self.rank == 0:
            return np.zeros(len(rows))
        return np.einsum("ij,ij->i", self.U[rows] * self.d, self.V[cols])

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.d))

    def dot(self, A):
        return (self.U * self.d) @ (self.V.T @ A)

    def tdot(self, B):
        return (self.V * self.d) @ (self.U.T @ B)

    def check(self, tol: float = 1e-10) -> None:
        """Raise if the factors are not orthonormal to ``tol * rank``."""
        k = self.rank
        if k == 0:
            return
        for name, F in (("U", self.U), ("V", self.V)):
            err = orthonormality_error(F)
            if err > tol * k:
                raise ValueError(f"{name} is not orthonormal (error {err:.3e})")


@dataclass(frozen=True, eq=False)
class SparseCoo:
    """Sparse matrix as sorted, duplicate-free ``(row, col, value)`` triplets.

    Explicit zeros are allowed so that a residual can carry the exact
    observation pattern.
    """

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    shape: tuple[int, int]
    _csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.vals, dtype=float)
        m, n = (int(x) for x in self.shape)
        if m < 1 or n < 1:
            raise ValueError(f"invalid shape {self.shape}")
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and vals must be 1-d arrays of equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
                raise ValueError("index out of range")
            key = rows * n + cols
            if np.any(np.diff(key) <= 0):
                raise ValueError("entries must be sorted by (row, col) with no duplicates")
            if not np.all(np.isfinite(vals)):
                raise ValueError("values must be finite")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "vals", vals)
        object.__setattr__(self, "shape", (m, n))

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape) -> "SparseCoo":
        """Build from unsorted triplets; duplicate coordinates raise."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if np.any(dup):
                i = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate coordinate ({rows[i]}, {cols[i]})")
        return cls(rows, cols, vals, shape)

    @classmethod
    def from_dense(cls, A) -> "SparseCoo":
        """Nonzero entries of a dense array."""
        A = np.asarray(A, dtype=float)
        rows, cols = np.nonzero(A)
        return cls(rows, cols, A[rows, cols], A.shape)

    @classmethod
    def empty(cls, m: int, n: int) -> "SparseCoo":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), (m, n))

    @property
    def nnz(self) -> int:
        return self.vals.size

    def with_values(self, vals) -> "SparseCoo":
        """Same pattern, new values."""
        return SparseCoo(self.rows, self.cols, vals, self.shape)

    def to_csr(self) -> sp.csr_matrix:
        if self._csr is None:
            csr = sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)
            object.__setattr__(self, "_csr", csr)
        return self._csr

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.vals
        return out

    def dot(self, A):
        return self.to_csr() @ A

    def tdot(self, B):
        return self.to_csr().T @ B


@dataclass(frozen=True, eq=False)
class SplrMatrix:
    """Implicit ``a * lowrank + b * sparse``, never densified for products."""

    lowrank: LowRankFactors
    sparse: SparseCoo
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.lowrank.shape != self.sparse.shape:
            raise ValueError(f"shape mismatch {self.lowrank.shape} vs {self.sparse.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.sparse.shape

    def dot(self, A):
        return splr_mul_right(self, A)

    def tdot(self, B):
        return splr_mul_left(self, B)

    def to_dense(self) -> np.ndarray:
        return self.a * self.lowrank.to_dense() + self.b * self.sparse.to_dense()


def splr_mul_right(Z: SplrMatrix, A: np.ndarray) -> np.ndarray:
    """``Z @ A`` in O((m + n) k r + nnz k)."""
    A = np.asarray(A, dtype=float)
    if A.shape[0] != Z.shape[1]:
        raise ValueError(f"cannot multiply {Z.shape} by {A.shape}")
    out = Z.b * Z.sparse.dot(A)
    if Z.lowrank.rank:
        out += Z.a * Z.lowrank.dot(A)
    return out


def splr_mul_left(Z: SplrMatrix, B: np.ndarray) -> np.ndarray:
    """``Z.T @ B`` in O((m + n) k r + nnz k)."""
    B = np.asarray(B, dtype=float)
    if B.shape[0] != Z.shape[0]:
        raise ValueError(f"cannot multiply {Z.shape}^T by {B.shape}")
    out = Z.b * Z.sparse.tdot(B)
    if Z.lowrank.rank:
        out += Z.a * Z.lowrank.tdot(B)
    return out


def qr_orthonormalize(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis for the column space of ``M``.

    Householder QR; column ``j`` is dropped when ``|R[j, j]|`` is at most
    ``1e-10 * (norm of M[:, j] + 1)``.  At most ``m`` columns are returned.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-d array")
    m, k = M.shape
    if k == 0:
        return np.empty((m, 0))
    Q, R = np.linalg.qr(M)
    r = min(m, k)
    keep = np.abs(np.diag(R)[:r]) > QR_DROP_RTOL * (np.linalg.norm(M[:, :r], axis=0) + 1.0)
    return Q[:, :r][:, keep]


def power_method(Z, R: np.ndarray, t_pm: int) -> np.ndarray:
    """Approximate leading left subspace of ``Z`` by subspace iteration.

    Starts from ``Y = Z @ R`` and runs ``t_pm`` rounds of
    ``Q = orth(Y); Y = Z @ (Z.T @ Q)``, returning the last ``Q``.
    ``R`` is used as given (no orthonormalization on entry).
    """
    Z = as_operator(Z)
    m, n = Z.shape
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != n:
        raise ValueError(f"R must have {n} rows, got shape {R.shape}")
    if R.shape[1] < 1:
        raise ValueError("R needs at least one column")
    if R.shape[1] > min(m, n):
        raise ValueError(f"k = {R.shape[1]} exceeds min(m, n) = {min(m, n)}")
    if t_pm < 1:
        raise ValueError("t_pm must be >= 1")
    Y = Z.dot(R)
    for _ in range(t_pm):
        Q = qr_orthonormalize(Y)
        Y = Z.dot(Z.tdot(Q))
    return Q


def _fix_signs(U, V):
    """Make the largest-magnitude entry of each column of ``U`` positive."""
    if U.shape[1] == 0:
        return U, V
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def thin_svd(M: np.ndarray):
    """SVD of a short-and-wide matrix with zero singular values removed.

    Returns ``(U, d, V)`` with ``M ~= U @ diag(d) @ V.T``.
    """
    M = np.asarray(M, dtype=float)
    k, n = M.shape
    if k > n:
        raise ValueError(f"thin_svd expects k <= n, got {M.shape}")
    if k == 0 or not np.any(M):
        return np.zeros((k, 0)), np.zeros(0), np.zeros((n, 0))
    U, d, Vt = np.linalg.svd(M, full_matrices=False)
    keep = d > max(k, n) * np.finfo(float).eps * d[0]
    U, V = _fix_signs(U[:, keep], Vt[keep].T)
    return U, d[keep], V


def frob_norm_diff_lowrank(A: LowRankFactors, B: LowRankFactors) -> float:
    """``||A - B||_F`` via projection onto the joint row and column bases."""
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    if A.rank == 0 or B.rank == 0:
        return B.frobenius_norm() if A.rank == 0 else A.frobenius_norm()
    P = qr_orthonormalize(np.hstack([A.U, B.U]))
    Q = qr_orthonormalize(np.hstack([A.V, B.V]))
    small = ((P.T @ A.U) * A.d) @ (A.V.T @ Q) - ((P.T @ B.U) * B.d) @ (B.V.T @ Q)
    return float(np.linalg.norm(small))


def basis_deflate(V_prev: np.ndarray, V_cur: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """``V_prev - V_cur (V_cur^T V_prev)`` with near-zero columns removed."""
    if V_prev.shape[0] != V_cur.shape[0]:
        raise ValueError("row counts differ")
    out = V_prev - V_cur @ (V_cur.T @ V_prev) if V_cur.shape[1] else V_prev.copy()
    return out[:, np.linalg.norm(out, axis=0) > tol]
