"""Command line entry points.

    fancl synth-mc    --m 500 --k 5 --reg capped-l1 --seed 0 --out report.json
    fancl synth-rpca  --m 500 --reg lsp --seed 0
    fancl complete    TRAIN [--valid VALID] [--test TEST] --reg lsp --lambda 5
    fancl rpca        MATRIX.csv --reg capped-l1 --lambda 4 --beta 0.4
    fancl eval        psnr A.csv B.csv | rmse FACTORS.npz TEST

Every solve can write a JSON report (``--out``) and a per-iteration CSV
trace (``--trace-csv``).  Traces leave ``elapsed_ms`` as ``nan`` unless
``--timing`` is given, so that repeated runs produce identical files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .. import __version__
from ..linalg import LowRankFactors
from ..problems import CompletionProblem, RpcaProblem
from ..regularizers import KINDS
from ..solver import SolverConfig, SolverError, fancl_rpca_solve, fancl_solve
from . import experiments as ex
from .io import FORMATS, load_dense, load_triplets, save_dense
from .metrics import psnr, rmse_test


def _add_solver_flags(p, defaults):
    p.add_argument("--reg", choices=KINDS, default="capped-l1")
    p.add_argument("--theta", type=float, default=None, help="shape parameter (default depends on --reg)")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="regularization weight")
    p.add_argument("--tau", type=float, default=defaults["tau"])
    p.add_argument("--nu", type=float, default=defaults["nu"], help="continuation decay")
    p.add_argument("--lambda0-mult", type=float, default=50.0, help="initial weight as a multiple of --lambda")
    p.add_argument("--tpm", type=int, default=3, help="power-method iterations")
    p.add_argument("--pmax", type=int, default=10, help="restarts per iteration")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank-init", type=int, default=5)
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--trace-csv", help="per-iteration CSV path")
    p.add_argument("--timing", action="store_true", help="record wall-clock times in the CSV trace")
    p.add_argument("--save-factors", help="write U, d, V to this .npz file")


def _config(args, lam, beta=None):
    return SolverConfig(
        lam=lam,
        tau=args.tau,
        lam0=args.lambda0_mult * lam,
        nu=args.nu,
        t_pm=args.tpm,
        p_max=args.pmax,
        max_iters=args.max_iter,
        tol=args.tol,
        seed=args.seed,
        rank_init=args.rank_init,
        beta=beta,
    )


def _emit(args, report, X=None, summary=None):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json(indent=2, default=float))
    if args.trace_csv:
        with open(args.trace_csv, "w", newline="") as fh:
            fh.write(report.trace_csv(timing=args.timing))
    if X is not None and args.save_factors:
        np.savez(args.save_factors, U=X.U, d=X.d, V=X.V)
    print(json.dumps(summary if summary is not None else report.final, default=float))


def cmd_synth_mc(args):
    base = _config(args, 1.0)
    run = ex.run_synth_completion(args.m, args.k, args.seed, args.reg, lam=args.lam, theta=args.theta, noise_std=args.noise_std, config=base)
    summary = {"reg": args.reg, "seed": args.seed, "lambda": run.lam, "nmse": run.nmse, "rank": run.rank, "iterations": len(run.report.records)}
    _emit(args, run.report, run.X, summary)


def cmd_synth_rpca(args):
    base = _config(args, 1.0, beta=1.0)
    run = ex.run_synth_rpca(args.m, args.seed, args.reg, lam=args.lam, beta=args.beta, theta=args.theta, noise_std=args.noise_std, config=base)
    summary = {
        "reg": args.reg,
        "seed": args.seed,
        "lambda": run.lam,
        "beta": run.beta,
        "nmse": run.nmse,
        "rank": run.rank,
        "support_accuracy": run.support,
    }
    _emit(args, run.report, run.X, summary)


def cmd_complete(args):
    train = load_triplets(args.train, args.format)
    shape = train.shape
    valid = load_triplets(args.valid, args.format, shape) if args.valid else None
    test = load_triplets(args.test, args.format, shape) if args.test else None
    problem = CompletionProblem(train)
    lam = args.lam
    selection = []
    if lam is None:
        if valid is None:
            raise SystemExit("--lambda is required without --valid")
        lam, selection = ex.select_lambda(problem, valid, args.reg, _config(args, 1.0), theta=args.theta)
    X, report = fancl_solve(problem, ex.make_regularizer(args.reg, lam, args.theta), _config(args, lam))
    if valid is not None:
        report.final["rmse_valid"] = rmse_test(X, valid)
    if test is not None:
        report.final["rmse_test"] = rmse_test(X, test)
    if selection:
        report.final["selection"] = [{"lambda": a, "rmse_valid": b, "rank": c} for a, b, c in selection]
    _emit(args, report, X)


def cmd_rpca(args):
    if args.lam is None or args.beta is None:
        raise SystemExit("rpca needs --lambda and --beta")
    O = load_dense(args.matrix)
    X, Y, report = fancl_rpca_solve(RpcaProblem(O), ex.make_regularizer(args.reg, args.lam, args.theta), _config(args, args.lam, args.beta))
    if args.low_rank_out:
        save_dense(args.low_rank_out, X.to_dense())
    if args.sparse_out:
        save_dense(args.sparse_out, Y.to_dense())
    _emit(args, report, X)


def cmd_eval(args):
    if args.metric == "psnr":
        value = psnr(load_dense(args.a), load_dense(args.b))
    else:
        f = np.load(args.a)
        X = LowRankFactors(f["U"], f["d"], f["V"])
        value = rmse_test(X, load_triplets(args.b, args.format, X.shape))
    print(json.dumps({args.metric: value}))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fancl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    bench_defaults = {"tau": ex.BENCH_TAU, "nu": ex.BENCH_NU}
    solver_defaults = {"tau": 1.5, "nu": 0.7}

    p = sub.add_parser("synth-mc", help="synthetic matrix completion")
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--noise-std", type=float, default=0.1)
    _add_solver_flags(p, bench_defaults)
    p.set_defaults(func=cmd_synth_mc)

    p = sub.add_parser("synth-rpca", help="synthetic robust PCA")
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=None)
    _add_solver_flags(p, bench_defaults)
    p.set_defaults(func=cmd_synth_rpca)

    p = sub.add_parser("complete", help="matrix completion from triplet files")
    p.add_argument("train")
    p.add_argument("--valid")
    p.add_argument("--test")
    p.add_argument("--format", choices=FORMATS, default="mm")
    _add_solver_flags(p, solver_defaults)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("rpca", help="robust PCA on a dense CSV matrix")
    p.add_argument("matrix")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--low-rank-out")
    p.add_argument("--sparse-out")
    _add_solver_flags(p, solver_defaults)
    p.set_defaults(func=cmd_rpca)

    p = sub.add_parser("eval", help="score a result")
    p.add_argument("metric", choices=("psnr", "rmse"))
    p.add_argument("a", help="psnr: dense CSV; rmse: factors .npz")
    p.add_argument("b", help="psnr: dense CSV; rmse: test triplets")
    p.add_argument("--format", choices=FORMATS, default="mm")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (SolverError, ValueError, OSError) as exc:
        print(f"fancl: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
