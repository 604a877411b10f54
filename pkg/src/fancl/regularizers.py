"""Scalar low-rank penalties and their one-dimensional proximal maps.

Every regularizer here acts on a matrix through its singular values,
``r(X) = sum_i rhat(sigma_i)``.  The proximal step on a matrix therefore
reduces to independent scalar problems

    min_{y >= 0}  0.5 * (y - sigma)**2 + mu * rhat(y)

which are solved exactly by enumerating the stationary points and piece
boundaries of the (at most three piece) objective.

Penalty formulas use the ``mu * rhat`` convention, where for SCAD and MCP
the knots themselves scale with ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KINDS",
    "RegularizerSpec",
    "penalty",
    "penalty_sum",
    "matrix_penalty",
    "threshold_gamma",
    "scalar_prox",
    "prox_values",
    "prox_objective",
    "scalar_prox_oracle",
]

KINDS = ("nuclear", "capped-l1", "lsp", "tnn", "scad", "mcp")

# relative slack used when two candidates reach the same objective value
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class RegularizerSpec:
    """Which penalty to use and its shape parameter ``theta``.

    ``theta`` is ignored for the nuclear norm, must be an integer >= 1 for
    TNN (number of unpenalized leading singular values) and must exceed 2
    for SCAD.
    """

    kind: str
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer {self.kind!r}; expected one of {KINDS}")
        if self.kind == "nuclear":
            return
        theta = self.theta
        if not np.isfinite(theta) or theta <= 0:
            raise ValueError(f"{self.kind} needs theta > 0, got {theta}")
        if self.kind == "scad" and theta <= 2:
            raise ValueError(f"scad needs theta > 2, got {theta}")
        if self.kind == "tnn":
            if float(theta) != int(theta):
                raise ValueError(f"tnn needs an integer theta, got {theta}")
            object.__setattr__(self, "theta", int(theta))

    @property
    def position_dependent(self) -> bool:
        return self.kind == "tnn"


def _scaled_penalty(reg, y, mu, exceeds=None):
    """Vectorized ``mu * rhat(y)``; ``exceeds`` marks TNN positions i > theta."""
    y = np.asarray(y, dtype=float)
    kind, theta = reg.kind, reg.theta
    if kind == "nuclear":
        return mu * y
    if kind == "capped-l1":
        return mu * np.minimum(y, theta)
    if kind == "lsp":
        return mu * np.log1p(y / theta)
    if kind == "tnn":
        if exceeds is None:
            raise ValueError("tnn penalty depends on rank position; pass exceeds")
        return np.where(exceeds, mu * y, 0.0)
    if kind == "scad":
        mid = (-(y**2) + 2.0 * theta * mu * y - mu**2) / (2.0 * (theta - 1.0))
        top = 0.5 * (theta + 1.0) * mu**2
        return np.where(y <= mu, mu * y, np.where(y <= theta * mu, mid, top))
    # mcp
    return np.where(y <= theta * mu, mu * y - y**2 / (2.0 * theta), 0.5 * theta * mu**2)


def penalty(reg: RegularizerSpec, sigma: float, mu: float) -> float:
    """Return ``mu * rhat(sigma)`` for a single singular value.

    TNN is rejected because its penalty depends on the rank position of
    ``sigma``; use :func:`penalty_sum` instead.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if reg.kind == "tnn":
        raise ValueError("penalty() is undefined for tnn; use penalty_sum()")
    return float(_scaled_penalty(reg, sigma, mu))


def _check_sorted(sigmas):
    s = np.asarray(sigmas, dtype=float)
    if s.ndim != 1:
        raise ValueError("singular values must be a 1-d vector")
    if s.size and (np.any(s < 0) or np.any(np.diff(s) > 0)):
        raise ValueError("singular values must be nonnegative and sorted nonincreasing")
    return s


def penalty_sum(reg: RegularizerSpec, sigmas, mu: float) -> float:
    """Sum of per-index penalties over a nonincreasing spectrum."""
    s = _check_sorted(sigmas)
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    exceeds = np.arange(1, s.size + 1) > reg.theta if reg.kind == "tnn" else None
    return float(np.sum(_scaled_penalty(reg, s, mu, exceeds)))


def matrix_penalty(reg: RegularizerSpec, sigmas, lam: float, tau: float = 1.0) -> float:
    """Regularization term ``lam * r(X)`` consistent with a prox of weight ``lam/tau``.

    Computed as ``tau * penalty_sum(reg, sigmas, lam / tau)``.  For the
    nuclear norm, capped-l1, LSP and TNN this equals
    ``lam * penalty_sum(reg, sigmas, 1)``; for SCAD and MCP the knots sit
    at multiples of ``lam / tau`` so that the proximal step solves the
    scalar problems exactly for this objective.
    """
    if lam <= 0 or tau <= 0:
        raise ValueError("lam and tau must be positive")
    return tau * penalty_sum(reg, sigmas, lam / tau)


def threshold_gamma(reg: RegularizerSpec, mu: float, sigma_theta_plus_1: float | None = None) -> float:
    """Cutoff ``gamma`` with ``sigma <= gamma  =>  prox(sigma) == 0``.

    For TNN the (theta+1)-th singular value of the current iterate must be
    supplied; the returned value is floored at the smallest positive float
    so that it stays strictly positive.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    kind, theta = reg.kind, reg.theta
    if kind == "tnn":
        if sigma_theta_plus_1 is None:
            raise ValueError("tnn threshold needs sigma_theta_plus_1")
        return max(min(mu, float(sigma_theta_plus_1)), np.finfo(float).tiny)
    if sigma_theta_plus_1 is not None:
        raise ValueError(f"sigma_theta_plus_1 only applies to tnn, not {kind}")
    if kind in ("nuclear", "scad"):
        return mu
    if kind == "capped-l1":
        # zero beats y = sigma > theta only while sigma**2 <= 2*mu*theta
        return min(mu, max(theta, math.sqrt(2.0 * mu * theta)))
    if kind == "lsp":
        return min(mu / theta, theta)
    return math.sqrt(theta) * mu if theta < 1 else mu


def _candidates(reg, s, mu):
    """Stationary points and piece boundaries of the scalar objective, shape (n, c)."""
    theta = reg.theta
    zero = np.zeros_like(s)
    if reg.kind == "capped-l1":
        cols = [zero, np.clip(s - mu, 0.0, theta), zero + theta, np.maximum(s, theta)]
    elif reg.kind == "lsp":
        disc = (s + theta) ** 2 - 4.0 * mu
        root = np.sqrt(np.maximum(disc, 0.0))
        ok = disc >= 0
        cols = [
            zero,
            np.where(ok, np.maximum(0.5 * (s - theta - root), 0.0), 0.0),
            np.where(ok, np.maximum(0.5 * (s - theta + root), 0.0), 0.0),
        ]
    elif reg.kind == "scad":
        inner = ((theta - 1.0) * s - theta * mu) / (theta - 2.0)
        cols = [
            zero,
            np.clip(s - mu, 0.0, mu),
            zero + mu,
            np.clip(inner, mu, theta * mu),
            zero + theta * mu,
            np.maximum(s, theta * mu),
        ]
    elif reg.kind == "mcp":
        cols = [zero, zero + theta * mu, np.maximum(s, theta * mu)]
        if theta > 1:
            cols.append(np.clip(theta * (s - mu) / (theta - 1.0), 0.0, theta * mu))
    else:
        raise AssertionError(reg.kind)
    return np.stack(cols, axis=1)


def prox_objective(reg, y, sigma, mu, exceeds=None):
    """``0.5 * (y - sigma)**2 + mu * rhat(y)``, vectorized."""
    y = np.asarray(y, dtype=float)
    return 0.5 * (y - sigma) ** 2 + _scaled_penalty(reg, y, mu, exceeds)


def prox_values(reg: RegularizerSpec, sigmas, mu: float, exceeds=None) -> np.ndarray:
    """Solve the scalar proximal problem for every entry of ``sigmas``.

    Parameters
    ----------
    reg : RegularizerSpec
    sigmas : array_like
        Nonnegative singular values (any order).
    mu : float
        Proximal weight.
    exceeds : array_like of bool, optional
        TNN only: whether each value's rank position is greater than theta.

    Returns
    -------
    ndarray
        Global minimizers; among several, the largest one.
    """
    s = np.atleast_1d(np.asarray(sigmas, dtype=float))
    if np.any(s < 0):
        raise ValueError("singular values must be nonnegative")
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if reg.kind == "nuclear":
        return np.maximum(s - mu, 0.0)
    if reg.kind == "tnn":
        if exceeds is None:
            raise ValueError("tnn prox needs exceeds (rank position > theta)")
        exceeds = np.broadcast_to(np.asarray(exceeds, dtype=bool), s.shape)
        return np.where(exceeds, np.maximum(s - mu, 0.0), s)

    cand = _candidates(reg, s, mu)
    h = prox_objective(reg, cand, s[:, None], mu)
    hmin = h.min(axis=1, keepdims=True)
    best = np.where(h <= hmin + _TIE_RTOL * (1.0 + np.abs(hmin)), cand, -np.inf).max(axis=1)
    best = np.minimum(best, s)
    best[s <= threshold_gamma(reg, mu)] = 0.0
    return best


def scalar_prox(reg: RegularizerSpec, sigma: float, mu: float, index_exceeds_theta: bool | None = None) -> float:
    """Exact minimizer of ``0.5 * (y - sigma)**2 + mu * rhat(y)`` over ``y >= 0``."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if reg.kind == "tnn" and index_exceeds_theta is None:
        raise ValueError("tnn prox needs index_exceeds_theta")
    return float(prox_values(reg, [sigma], mu, index_exceeds_theta)[0])


def scalar_prox_oracle(
    reg: RegularizerSpec,
    sigma: float,
    mu: float,
    grid_step: float = 1e-4,
    index_exceeds_theta: bool | None = None,
) -> float:
    """Brute-force the scalar proximal problem on ``{0, step, 2*step, ..., sigma}``.

    Test oracle only.  Ties go to the largest grid point.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    if sigma <= 0:
        return 0.0
    grid = np.append(np.arange(0.0, sigma, grid_step), sigma)
    h = prox_objective(reg, grid, sigma, mu, index_exceeds_theta)
    return float(grid[grid.size - 1 - np.argmin(h[::-1])])
