"""Benchmark protocols shared by the CLI and the reproduction tests.

Completion: the observed entries are split into a tuning-train part and a
small held-out part (``HOLDOUT`` of the entries); ``lam`` is picked by
held-out RMSE over a geometric grid scaled by the top singular value of
the tuning-train matrix, and the model is refit on every observed entry with ``lam`` multiplied by
``n_observed / n_tuning_train`` (the loss is a sum over entries, so this
keeps the loss-to-penalty balance).  A large held-out part would tune
``lam`` for a much sparser problem than the one finally solved.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse.linalg as spla

from ..linalg import SparseCoo
from ..problems import CompletionProblem
from ..regularizers import RegularizerSpec, prox_values
from ..solver import SolverConfig, SolverError, fancl_rpca_solve, fancl_solve
from .metrics import nmse_completion, nmse_rpca, rmse_test, support_accuracy
from .io import split_observations
from .synth import gen_synth_completion, gen_synth_rpca

__all__ = [
    "BENCH_TAU",
    "BENCH_NU",
    "LAMBDA_GRID",
    "default_theta",
    "make_regularizer",
    "top_singular_value",
    "select_lambda",
    "CompletionRun",
    "run_synth_completion",
    "RpcaRun",
    "zero_threshold",
    "noise_matched_lambda",
    "rpca_parameters",
    "run_synth_rpca",
]

# benchmark solver settings: a longer continuation path keeps the
# intermediate rank near its final value, which is what makes runs fast
BENCH_TAU = 1.1
BENCH_NU = 0.95

# tuning solves only need to rank the candidates
SELECT_TOL = 1e-6

# lam / sigma_1(train) candidates
LAMBDA_GRID = tuple(2.0**j for j in range(-7, 1))
HOLDOUT = 0.1


def default_theta(kind: str, lam: float) -> float:
    """capped-l1 ``2 lam``, LSP ``sqrt(lam)``, TNN 3, SCAD 3.7, MCP 3."""
    return {
        "nuclear": 0.0,
        "capped-l1": 2.0 * lam,
        "lsp": math.sqrt(lam),
        "tnn": 3,
        "scad": 3.7,
        "mcp": 3.0,
    }[kind]


def make_regularizer(kind: str, lam: float, theta: float | None = None) -> RegularizerSpec:
    return RegularizerSpec(kind, default_theta(kind, lam) if theta is None else theta)


def top_singular_value(A) -> float:
    if isinstance(A, SparseCoo):
        A = A.to_csr()
    if min(A.shape) < 3:
        return float(np.linalg.norm(A.toarray() if hasattr(A, "toarray") else A, 2))
    v0 = np.ones(min(A.shape))
    return float(spla.svds(A, k=1, v0=v0, return_singular_vectors=False)[0])


def _at(base: SolverConfig, lam: float, **kw) -> SolverConfig:
    """``base`` moved to weight ``lam``, keeping the ratio ``lam0 / lam``."""
    return replace(base, lam=lam, lam0=base.lam0 / base.lam * lam, **kw)


def select_lambda(
    train: CompletionProblem, valid: SparseCoo, kind: str, base: SolverConfig, grid=LAMBDA_GRID, theta=None, stop_rise=0.0, refine=False, reports=None
):
    """Return ``(best_lam, table)`` where ``table`` lists ``(lam, rmse, rank)``.

    The grid (multiples of the top singular value of the training matrix)
    is walked from large to small ``lam`` and the walk stops once the
    validation RMSE exceeds ``1 + stop_rise`` times the best seen so far
    (by default: as soon as it rises);
    smaller weights only add rank and cost from there.  With ``refine``
    the geometric midpoints next to the best point are tried as well.
    Grid points whose solve fails are skipped; ties go to the larger
    ``lam``.  When ``reports`` is a list, each solve's report is appended.
    """
    s1 = top_singular_value(train.observed)
    table = []

    def trial(lam):
        try:
            cfg = _at(base, lam, tol=max(base.tol, SELECT_TOL))
            X, report = fancl_solve(train, make_regularizer(kind, lam, theta), cfg)
        except SolverError:
            return None
        if reports is not None:
            reports.append(report)
        row = (lam, rmse_test(X, valid), X.rank)
        table.append(row)
        return row

    for g in sorted(grid, reverse=True):
        row = trial(g * s1)
        if row and row[1] > (1.0 + stop_rise) * min(r[1] for r in table[:-1] or [row]):
            break
    if not table:
        raise SolverError(f"every grid point failed for {kind}")
    best = min(table, key=lambda row: (row[1], -row[0]))
    if refine and len(grid) > 1:
        ratio = math.sqrt(max(grid) / min(grid)) ** (1.0 / (len(grid) - 1))
        tried = {r[0] for r in table}
        for lam in (best[0] * ratio, best[0] / ratio):
            if lam not in tried:
                trial(lam)
        best = min(table, key=lambda row: (row[1], -row[0]))
    return best[0], table


@dataclass
class CompletionRun:
    kind: str
    seed: int
    lam: float
    nmse: float
    rank: int
    X: object
    report: object
    selection: list
    tuning_reports: list
    seconds_total: float
    seconds_refit: float


def run_synth_completion(m: int, k: int, seed: int, kind: str, *, lam=None, theta=None, noise_std=0.1, config=None):
    """Generate, tune on a holdout (unless ``lam`` is given), refit, score.

    ``lam`` when given is the weight for the full refit.
    """
    start = time.perf_counter()
    _, _, truth = gen_synth_completion(m, k, seed, noise_std)
    base = config or SolverConfig(lam=1.0, tau=BENCH_TAU, nu=BENCH_NU, seed=seed)
    selection, tuning = [], []
    if lam is None:
        fit, held = split_observations(truth.omega, (1.0 - HOLDOUT, HOLDOUT), seed)
        lam_fit, selection = select_lambda(CompletionProblem(fit), held, kind, base, theta=theta, reports=tuning)
        lam = lam_fit * truth.omega.nnz / fit.nnz
    full = CompletionProblem(truth.omega)
    refit_start = time.perf_counter()
    X, report = fancl_solve(full, make_regularizer(kind, lam, theta), _at(base, lam))
    refit_seconds = time.perf_counter() - refit_start
    nmse = nmse_completion(X, truth.low_rank, truth.omega)
    report.final.update(nmse=nmse, lambda_selected=lam)
    total = time.perf_counter() - start
    return CompletionRun(kind, seed, lam, nmse, X.rank, X, report, selection, tuning, total, refit_seconds)


@dataclass
class RpcaRun:
    kind: str
    seed: int
    lam: float
    beta: float
    nmse: float
    rank: int
    support: float
    X: object
    Y: object
    report: object


def _bisect(pred, lo, hi, iters=100):
    """Largest x in [lo, hi] with pred(x) true, assuming pred is true then false."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if pred(mid) else (lo, mid)
    return lo


def zero_threshold(reg: RegularizerSpec, mu: float) -> float:
    """Largest ``sigma`` the scalar prox of weight ``mu`` maps to zero.

    For TNN this refers to positions past ``theta``.
    """
    exceeds = True if reg.kind == "tnn" else None
    hi = 1.0
    while prox_values(reg, [hi], mu, exceeds)[0] == 0.0:
        hi *= 2.0
    return _bisect(lambda s: prox_values(reg, [s], mu, exceeds)[0] == 0.0, 0.0, hi)


def noise_matched_lambda(kind: str, kappa: float, tau: float, theta=None) -> float:
    """``lam`` whose proximal step (weight ``lam / tau``) zeroes exactly the
    singular values up to ``kappa / tau``.

    This puts every regularizer on the same footing: components at the
    noise level are removed, and the penalties differ only in how they
    treat the large singular values.
    """
    def below(lam):
        return zero_threshold(make_regularizer(kind, lam, theta), lam / tau) < kappa / tau

    hi = kappa
    while below(hi):
        hi *= 2.0
    return _bisect(below, 0.0, hi)


def rpca_parameters(m: int, kind: str = "nuclear", noise_std: float = 0.1, tau: float = BENCH_TAU, theta=None):
    """Default ``(lam, beta)`` for the synthetic RPCA protocol.

    ``beta = 10 * noise_std`` sits well above the largest noise entry
    (about ``4.9 std`` over a 500 x 500 matrix) and far below the
    corruptions.  ``lam`` is noise matched (:func:`noise_matched_lambda`)
    to twice the noise spectral norm ``2 sqrt(m) std``.
    """
    beta = 10.0 * noise_std
    kappa = 2.0 * 2.0 * math.sqrt(m) * noise_std
    return noise_matched_lambda(kind, kappa, tau, theta), beta


def run_synth_rpca(m: int, seed: int, kind: str, *, lam=None, beta=None, theta=None, noise_std=0.1, config=None):
    problem, truth = gen_synth_rpca(m, seed, noise_std)
    base = config or SolverConfig(lam=1.0, tau=BENCH_TAU, nu=BENCH_NU, seed=seed)
    d_lam, d_beta = rpca_parameters(m, kind, noise_std, base.tau, theta)
    lam = d_lam if lam is None else lam
    beta = d_beta if beta is None else beta
    cfg = _at(base, lam, beta=beta)
    X, Y, report = fancl_rpca_solve(problem, make_regularizer(kind, lam, theta), cfg)
    nmse = nmse_rpca(X, Y, truth)
    acc = support_accuracy(Y, truth.Y)
    report.final.update(nmse=nmse, support_accuracy=acc)
    return RpcaRun(kind, seed, lam, beta, nmse, X.rank, acc, X, Y, report)
