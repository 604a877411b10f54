"""Reading and writing observed entries, plus train/validation/test splits.

Two text formats are accepted: MatrixMarket coordinate files (1-based)
and bare ``i j value`` triplets (1-based, ``%`` comment lines).
"""

from __future__ import annotations

import os

import numpy as np
import scipy.io
import scipy.sparse

from ..linalg import SparseCoo

__all__ = ["FORMATS", "load_triplets", "save_triplets", "split_observations", "load_dense", "save_dense"]

FORMATS = ("mm", "bare")


def _bare_header_shape(path):
    with open(path) as fh:
        parts = fh.readline().lstrip("%").split()
    if len(parts) == 3 and all(p.isdigit() for p in parts):
        return int(parts[0]), int(parts[1])
    return None


def load_triplets(path, format: str = "mm", shape=None) -> SparseCoo:
    """Load a sparse matrix; duplicate coordinates raise ``ValueError``.

    For the bare format the shape defaults to a ``% m n nnz`` header line
    (as written by :func:`save_triplets`), else to the largest indices seen.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    if format == "mm":
        A = scipy.io.mmread(path, spmatrix=True)
        if not hasattr(A, "row"):
            raise ValueError(f"{path} is not a coordinate MatrixMarket file")
        return SparseCoo.from_triplets(A.row, A.col, A.data, shape or A.shape)
    if format == "bare":
        if shape is None:
            shape = _bare_header_shape(path)
        data = np.loadtxt(path, comments="%", ndmin=2)
        if data.size == 0:
            if shape is None:
                raise ValueError("empty file needs an explicit shape")
            return SparseCoo.empty(*shape)
        if data.shape[1] != 3:
            raise ValueError(f"expected 3 columns, got {data.shape[1]}")
        idx = data[:, :2]
        if np.any(idx != np.round(idx)) or np.any(idx < 1):
            raise ValueError("indices must be positive integers")
        rows, cols = idx.astype(np.int64).T - 1
        if shape is None:
            shape = (int(rows.max()) + 1, int(cols.max()) + 1)
        return SparseCoo.from_triplets(rows, cols, data[:, 2], shape)
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def save_triplets(path, A: SparseCoo, format: str = "mm") -> None:
    if format == "mm":
        coo = scipy.sparse.coo_matrix((A.vals, (A.rows, A.cols)), shape=A.shape)
        # through a handle: given a bare path, mmwrite appends ".mtx"
        with open(path, "wb") as fh:
            scipy.io.mmwrite(fh, coo, field="real", symmetry="general", precision=17)
    elif format == "bare":
        with open(path, "w") as fh:
            fh.write(f"% {A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for i, j, v in zip(A.rows, A.cols, A.vals):
                fh.write(f"{i + 1} {j + 1} {v:.17g}\n")
    else:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def split_observations(A: SparseCoo, fractions=(0.5, 0.25, 0.25), seed: int = 0):
    """Randomly partition the entries of ``A``; returns one SparseCoo per fraction.

    Counts are ``floor(fraction * nnz)`` with the remainder given to the
    first parts in order.
    """
    fr = np.asarray(fractions, dtype=float)
    if np.any(fr < 0) or not np.isclose(fr.sum(), 1.0):
        raise ValueError("fractions must be nonnegative and sum to 1")
    nnz = A.nnz
    counts = np.floor(fr * nnz).astype(int)
    counts[: nnz - counts.sum()] += 1
    perm = np.random.default_rng(seed).permutation(nnz)
    parts = []
    lo = 0
    for c in counts:
        idx = np.sort(perm[lo : lo + c])
        parts.append(SparseCoo(A.rows[idx], A.cols[idx], A.vals[idx], A.shape))
        lo += c
    return tuple(parts)


def load_dense(path) -> np.ndarray:
    """Dense matrix from CSV (``%`` or ``#`` comments ignored)."""
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith(("%", "#"))]
    return np.loadtxt(lines, delimiter=",", ndmin=2)


def save_dense(path, A) -> None:
    np.savetxt(path, np.asarray(A, dtype=float), delimiter=",", fmt="%.17g")
