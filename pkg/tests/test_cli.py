import json

import numpy as np
import pytest

from fancl.bench.cli import build_parser, main
from fancl.bench.io import save_dense, save_triplets, split_observations
from fancl.bench.synth import gen_synth_completion


def _run(capsys, argv):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


@pytest.fixture
def triplets(tmp_path):
    _, _, truth = gen_synth_completion(80, 2, seed=0)
    parts = split_observations(truth.omega, (0.8, 0.1, 0.1), seed=0)
    paths = []
    for name, part in zip(("train", "valid", "test"), parts):
        path = str(tmp_path / f"{name}.mtx")
        save_triplets(path, part)
        paths.append(path)
    return paths


def test_synth_rpca_trace_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        out = _run(capsys, ["synth-rpca", "--m", "100", "--reg", "lsp", "--seed", "3", "--trace-csv", str(path)])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "t,objective,rank,delta_sq,elapsed_ms"
    assert out["rank"] == 1 and out["support_accuracy"] == 1.0


def test_complete_with_selection(triplets, tmp_path, capsys):
    train, valid, test = triplets
    report = tmp_path / "r.json"
    factors = tmp_path / "f.npz"
    out = _run(capsys, ["complete", train, "--valid", valid, "--test", test, "--out", str(report), "--save-factors", str(factors)])
    assert out["rank"] == 2
    assert out["rmse_test"] < 0.2
    assert out["selection"]
    assert json.loads(report.read_text())["final"]["rmse_test"] == out["rmse_test"]
    again = _run(capsys, ["eval", "rmse", str(factors), test])
    assert again["rmse"] == pytest.approx(out["rmse_test"])


def test_complete_fixed_lambda_bare(tmp_path, capsys):
    _, _, truth = gen_synth_completion(60, 2, seed=1)
    path = str(tmp_path / "train.txt")
    save_triplets(path, truth.omega, "bare")
    out = _run(capsys, ["complete", path, "--format", "bare", "--reg", "lsp", "--lambda", "4", "--max-iter", "7"])
    assert out["lambda_t"] > 4


def test_rpca_files(tmp_path, capsys):
    rng = np.random.default_rng(0)
    L = rng.standard_normal((30, 2)) @ rng.standard_normal((2, 25))
    O = L.copy()
    O[3, 4] += 20.0
    path = str(tmp_path / "m.csv")
    save_dense(path, O)
    low, sparse = tmp_path / "low.csv", tmp_path / "sparse.csv"
    out = _run(capsys, ["rpca", path, "--lambda", "3", "--beta", "2", "--low-rank-out", str(low), "--sparse-out", str(sparse)])
    assert out["rank"] == 2 and out["sparse_nnz"] == 1
    S = np.loadtxt(sparse, delimiter=",")
    assert np.flatnonzero(S).tolist() == [3 * 25 + 4]


def test_eval_psnr(tmp_path, capsys):
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    save_dense(a, np.zeros((3, 3)))
    save_dense(b, np.full((3, 3), 0.1))
    assert _run(capsys, ["eval", "psnr", a, b])["psnr"] == pytest.approx(20.0)


def test_errors(tmp_path, capsys):
    assert main(["complete", str(tmp_path / "missing.mtx"), "--lambda", "1"]) == 1
    assert "no such file" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["rpca", "x.csv", "--lambda", "1"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["synth-mc", "--reg", "l0"])


def test_defaults():
    ap = build_parser()
    mc = ap.parse_args(["synth-mc"])
    assert (mc.tau, mc.nu, mc.lambda0_mult) == (1.1, 0.95, 50.0)
    cp = ap.parse_args(["complete", "t.mtx"])
    assert (cp.tau, cp.nu, cp.tpm, cp.pmax) == (1.5, 0.7, 3, 10)
