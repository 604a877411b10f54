import json

import numpy as np
import pytest
from conftest import random_sparse

from fancl.linalg import LowRankFactors, SparseCoo
from fancl.problems import CompletionProblem, RpcaProblem
from fancl.regularizers import RegularizerSpec
from fancl.solver import (
    TRACE_HEADER,
    SolverConfig,
    SolverError,
    continuation,
    fancl_rpca_solve,
    fancl_solve,
    reference_solve,
    soft_threshold_matrix,
    sufficient_decrease,
)


def test_continuation():
    assert continuation(10, 1, 0.5) == 5.5
    assert continuation(1, 1, 0.3) == 1
    lam = 100.0
    for _ in range(20):
        lam = continuation(lam, 1.0, 0.7)
    assert lam - 1 <= 100 * 0.7**20
    with pytest.raises(ValueError):
        continuation(0.5, 1, 0.5)
    with pytest.raises(ValueError):
        continuation(2, 1, 1.0)


def test_sufficient_decrease():
    assert sufficient_decrease(9, 10, 1, 0.5)
    assert not sufficient_decrease(10, 10, 1, 0.5)
    assert sufficient_decrease(9.5, 10, 1, 0.5)
    with pytest.raises(ValueError):
        sufficient_decrease(np.nan, 10, 1, 0.5)
    with pytest.raises(ValueError):
        sufficient_decrease(1, 10, 1, 0.0)
    with pytest.raises(ValueError):
        sufficient_decrease(1, 10, -1, 0.5)


def test_soft_threshold():
    S = soft_threshold_matrix(np.array([[2.0, -0.5]]), 1.0)
    assert S.nnz == 1 and (S.rows[0], S.cols[0], S.vals[0]) == (0, 0, 1.0)
    assert soft_threshold_matrix(np.array([[2.0, -0.5]]), 2.0).nnz == 0
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((10, 10))
    np.testing.assert_array_equal(soft_threshold_matrix(Z, 0.3).to_dense(), np.sign(Z) * np.maximum(np.abs(Z) - 0.3, 0))
    with pytest.raises(ValueError):
        soft_threshold_matrix(Z, 0.0)


def test_config_validation():
    cfg = SolverConfig(lam=2.0)
    assert cfg.lam0 == 100.0
    assert cfg.c1(1.0) == pytest.approx(0.125)
    for bad in [dict(tau=1.0), dict(nu=1.0), dict(lam0=1.0), dict(t_pm=0), dict(beta=-1.0)]:
        with pytest.raises(ValueError):
            SolverConfig(lam=2.0, **bad).validate(1.0)


def _small_completion(seed=0, m=60, n=50, k=3, frac=0.4):
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((m, k)) @ rng.standard_normal((k, n))
    obs = random_sparse(rng, m, n, int(frac * m * n))
    obs = obs.with_values(L[obs.rows, obs.cols] + 0.01 * rng.standard_normal(obs.nnz))
    return CompletionProblem(obs), L


def test_all_thresholded():
    rng = np.random.default_rng(1)
    O = rng.standard_normal((6, 5))
    obs = SparseCoo.from_dense(O)
    X, rep = fancl_solve(CompletionProblem(obs), RegularizerSpec("nuclear"), SolverConfig(lam=100.0))
    assert X.rank == 0
    assert rep.records[-1].objective == pytest.approx(0.5 * np.sum(O**2))


@pytest.mark.parametrize("kind,theta", [("nuclear", 0), ("capped-l1", 4.0), ("lsp", 1.0), ("tnn", 3), ("scad", 3.7), ("mcp", 3.0)])
def test_descent_and_certificates(kind, theta):
    P, L = _small_completion()
    cfg = SolverConfig(lam=1.0, tau=1.2, nu=0.9)
    X, rep = fancl_solve(P, RegularizerSpec(kind, theta), cfg)
    c1 = cfg.c1(1.0)
    F = np.concatenate([[np.nan], rep.objectives])
    for r in rep.records:
        assert r.accepted
    # each accepted step satisfies the decrease test against F(X^t) at lambda_t
    assert np.all(np.diff(rep.objectives) <= 1e-9 * abs(rep.initial_objective))
    b = rep.bounds
    assert b["sum_bound_holds"] and b["rate_bound_holds"] and b["monotone"]
    assert b["rate_bound_lhs"] <= b["rate_bound_rhs"] + 1e-12 * max(1, abs(rep.initial_objective))
    assert c1 * b["sum_delta_sq"] <= rep.initial_objective - rep.final["objective"] + 1e-9


def test_recovers_low_rank():
    P, L = _small_completion(frac=0.5)
    X, rep = fancl_solve(P, RegularizerSpec("capped-l1", 6.0), SolverConfig(lam=3.0, tau=1.1, nu=0.9))
    assert X.rank == 3
    assert np.linalg.norm(X.to_dense() - L) / np.linalg.norm(L) < 0.01
    assert rep.converged


def test_matches_reference():
    P, _ = _small_completion()
    reg = RegularizerSpec("lsp", 1.0)
    cfg = SolverConfig(lam=1.0, tau=1.1, nu=0.9)
    X1, r1 = fancl_solve(P, reg, cfg)
    X2, r2 = reference_solve(P, reg, cfg)
    assert abs(r1.final["objective"] - r2.final["objective"]) <= 1e-4 * abs(r2.final["objective"])
    assert X1.rank == X2.rank


def test_deterministic():
    P, _ = _small_completion()
    reg = RegularizerSpec("mcp", 3.0)
    cfg = SolverConfig(lam=1.0, seed=7)
    a = fancl_solve(P, reg, cfg)[1]
    b = fancl_solve(P, reg, cfg)[1]
    assert a.trace_csv(timing=False) == b.trace_csv(timing=False)
    np.testing.assert_array_equal(a.objectives, b.objectives)


def test_report_serialization():
    P, _ = _small_completion()
    X, rep = fancl_solve(P, RegularizerSpec("nuclear"), SolverConfig(lam=2.0, max_iters=20))
    d = json.loads(rep.to_json())
    assert set(d) >= {"config", "per_iteration", "bounds", "final"}
    assert set(d["per_iteration"][0]) >= {"t", "objective", "rank", "k_hat", "restarts", "delta_sq", "elapsed_ms"}
    assert {"sum_delta_sq", "rate_bound_lhs", "rate_bound_rhs"} <= set(d["bounds"])
    lines = rep.trace_csv(timing=False).splitlines()
    assert lines[0] == ",".join(TRACE_HEADER)
    assert len(lines) == len(rep.records) + 1
    assert lines[1].endswith(",nan")


def test_max_iters_respected():
    P, _ = _small_completion()
    _, rep = fancl_solve(P, RegularizerSpec("nuclear"), SolverConfig(lam=1.0, max_iters=5))
    assert len(rep.records) == 5 and not rep.converged


def test_invalid_config():
    P, _ = _small_completion()
    with pytest.raises(ValueError):
        fancl_solve(P, RegularizerSpec("nuclear"), SolverConfig(lam=1.0, tau=0.9))


def test_solver_error_carries_report():
    err = SolverError("x", report="r")
    assert err.report == "r"


class TestRpca:
    def test_zero(self):
        X, Y, rep = fancl_rpca_solve(RpcaProblem(np.zeros((8, 6))), RegularizerSpec("nuclear"), SolverConfig(lam=1.0, beta=0.1))
        assert X.rank == 0 and Y.nnz == 0

    def test_spikes(self):
        O = np.zeros((10, 8))
        O[1, 2], O[5, 7] = 4.0, -3.0
        cfg = SolverConfig(lam=1e3, beta=0.5, tau=1.1)
        X, Y, rep = fancl_rpca_solve(RpcaProblem(O), RegularizerSpec("capped-l1", 2e3), cfg)
        assert X.rank == 0
        np.testing.assert_allclose(Y.to_dense(), np.sign(O) * np.maximum(np.abs(O) - 0.5, 0), atol=1e-6)

    def test_needs_beta(self):
        with pytest.raises(ValueError):
            fancl_rpca_solve(RpcaProblem(np.ones((3, 3))), RegularizerSpec("nuclear"), SolverConfig(lam=1.0))

    def test_small_recovery(self):
        rng = np.random.default_rng(3)
        L = rng.standard_normal((60, 2)) @ rng.standard_normal((2, 50))
        S = np.zeros_like(L)
        idx = rng.choice(L.size, 30, replace=False)
        S.flat[idx] = 10 * rng.choice([-1, 1], 30)
        X, Y, rep = fancl_rpca_solve(RpcaProblem(L + S), RegularizerSpec("capped-l1", 6.0), SolverConfig(lam=3.0, beta=0.5, tau=1.1, nu=0.9))
        assert X.rank == 2
        assert set(np.flatnonzero(Y.to_dense())) == set(idx)
        assert rep.bounds["sum_bound_holds"] and rep.bounds["rate_bound_holds"]
        assert rep.final["sparse_nnz"] == 30
