import csv

import numpy as np
import pytest

from ockm.cli import main
from ockm.codebooks import Model, Variant, encode_points
from ockm.dataio import load_codes, load_model, read_fvecs, read_ivecs, save_model, write_fvecs
from ockm.evaluation import Dataset, read_csv, run_benchmark, write_csv
from ockm.search import build_point_norms, knn_search_batch
from ockm.training import distortion


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--n", 2000, "--p", 16, "--clusters", 20, "--spread", 0.1, "--seed", 3,
               "--out", d / "db.fvecs") == 0
    assert run("synth", "--n", 30, "--p", 16, "--clusters", 20, "--spread", 0.1, "--seed", 4,
               "--out", d / "q.fvecs") == 0
    assert run("train", "--input", d / "db.fvecs", "--variant", "ockm", "--m", 2, "--k", 16, "--c", 2,
               "--t", 4, "--iters", 6, "--seed", 1, "--model", d / "m.ockm", "--codes", d / "train.codes",
               "--trace", d / "trace.csv", "--threads", 1) == 0
    assert run("encode", "--model", d / "m.ockm", "--input", d / "db.fvecs", "--codes", d / "db.codes",
               "--t", 4, "--threads", 1) == 0
    return d


def test_train_trace_monotone(work):
    with open(work / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    vals = [float(r["distortion"]) for r in rows]
    assert len(vals) >= 2
    assert all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))


def test_train_missing_input(tmp_path, capsys):
    missing = tmp_path / "nope.fvecs"
    code = run("train", "--input", missing, "--variant", "ckm", "--m", 2, "--seed", 1, "--model", tmp_path / "m")
    assert code != 0
    assert str(missing) in capsys.readouterr().err


def test_train_deterministic(work, tmp_path):
    assert run("train", "--input", work / "db.fvecs", "--variant", "ockm", "--m", 2, "--k", 16, "--c", 2,
               "--t", 4, "--iters", 6, "--seed", 1, "--model", tmp_path / "again.ockm", "--threads", 2) == 0
    assert (tmp_path / "again.ockm").read_bytes() == (work / "m.ockm").read_bytes()


def test_encode_zero_database(tmp_path, capsys):
    books = np.zeros((2, 1, 2, 3))
    books[:, 0, :, 1] = 1.0
    save_model(tmp_path / "z.ockm", Model(Variant.CKM, np.eye(4), books))
    write_fvecs(tmp_path / "zero.fvecs", np.zeros((10, 4)))
    capsys.readouterr()
    assert run("encode", "--model", tmp_path / "z.ockm", "--input", tmp_path / "zero.fvecs",
               "--codes", tmp_path / "z.codes") == 0
    assert capsys.readouterr().out.strip() == "distortion=0.0"


def test_encode_idempotent_and_matches_library(work, tmp_path, capsys):
    capsys.readouterr()
    assert run("encode", "--model", work / "m.ockm", "--input", work / "db.fvecs",
               "--codes", tmp_path / "again.codes", "--t", 4) == 0
    printed = float(capsys.readouterr().out.strip().split("=")[1])
    assert (tmp_path / "again.codes").read_bytes() == (work / "db.codes").read_bytes()
    x = read_fvecs(work / "db.fvecs")
    model = load_model(work / "m.ockm")
    lib = distortion(x, model, encode_points(model, x, t=4)[0])
    assert printed == pytest.approx(lib, rel=1e-10)


def test_search_rank_one(work, tmp_path):
    model = load_model(work / "m.ockm")
    codes = load_codes(work / "db.codes")
    write_fvecs(tmp_path / "self.fvecs", model.decode(codes[[0, 17, 400]]))
    assert run("search", "--model", work / "m.ockm", "--codes", work / "db.codes", "--queries",
               tmp_path / "self.fvecs", "--r", 5, "--out", tmp_path / "ids.ivecs") == 0
    ids = read_ivecs(tmp_path / "ids.ivecs")
    recon = model.decode(codes)
    for row, want in zip(ids, (0, 17, 400)):
        # another point with the same code may win only when it decodes identically
        assert row[0] == want or np.allclose(recon[row[0]], recon[want], atol=1e-5)


@pytest.mark.parametrize("mode", ["ad", "sd"])
def test_search_matches_library(work, tmp_path, mode):
    assert run("search", "--model", work / "m.ockm", "--codes", work / "db.codes", "--queries",
               work / "q.fvecs", "--r", 20, "--mode", mode, "--t", 4, "--out", tmp_path / "ids.ivecs") == 0
    model = load_model(work / "m.ockm")
    codes = load_codes(work / "db.codes")
    lib = knn_search_batch(read_fvecs(work / "q.fvecs"), model, codes, build_point_norms(model, codes), 20, mode,
                           t=4)
    np.testing.assert_array_equal(read_ivecs(tmp_path / "ids.ivecs"), lib)


def test_eval_exact_results(work, tmp_path):
    assert run("gt", "--database", work / "db.fvecs", "--queries", work / "q.fvecs", "--r", 100,
               "--out", tmp_path / "gt.ivecs") == 0
    assert run("eval", "--results", tmp_path / "gt.ivecs", "--queries", work / "q.fvecs", "--database",
               work / "db.fvecs", "--truth", tmp_path / "gt.ivecs", "--out", tmp_path / "m.csv") == 0
    rows = read_csv(tmp_path / "m.csv")
    assert {float(r["value"]) for r in rows} == {1.0}
    assert [int(r["x"]) for r in rows if r["metric"] == "recall"] == [1, 2, 5, 10, 20, 50, 100]


def test_pipeline_reproduces_benchmark(work, tmp_path):
    assert run("search", "--model", work / "m.ockm", "--codes", work / "db.codes", "--queries",
               work / "q.fvecs", "--r", 1000, "--t", 4, "--out", tmp_path / "ids.ivecs") == 0
    assert run("eval", "--results", tmp_path / "ids.ivecs", "--queries", work / "q.fvecs", "--database",
               work / "db.fvecs", "--model", work / "m.ockm", "--train", work / "db.fvecs", "--train-codes",
               work / "train.codes", "--dataset", "d", "--bits", 16, "--t", 4, "--seed", 1,
               "--out", tmp_path / "cli.csv") == 0
    db, qs = read_fvecs(work / "db.fvecs"), read_fvecs(work / "q.fvecs")
    rows = run_benchmark([Dataset("d", db, db, qs)], [Variant.OCKM], ("ad",), (16,), (1,), k=16, t=4, iters=6)
    write_csv_path = tmp_path / "lib.csv"
    write_csv(write_csv_path, rows)
    assert (tmp_path / "cli.csv").read_text() == write_csv_path.read_text()


def test_exit_codes(work, tmp_path):
    assert run("train", "--input", work / "db.fvecs", "--variant", "ckm", "--m", 5, "--seed", 1,
               "--model", tmp_path / "m") == 2
    (tmp_path / "junk.ockm").write_bytes(b"XXXX" + bytes(40))
    assert run("encode", "--model", tmp_path / "junk.ockm", "--input", work / "db.fvecs",
               "--codes", tmp_path / "c") == 3
    (tmp_path / "bad.fvecs").write_bytes(b"\x04\x00\x00\x00\x00\x00")
    assert run("encode", "--model", work / "m.ockm", "--input", tmp_path / "bad.fvecs",
               "--codes", tmp_path / "c") == 3


def test_synth_requires_seed(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("synth", "--n", 10, "--p", 2, "--clusters", 2, "--spread", 0.1, "--out", tmp_path / "x.fvecs")
    assert exc.value.code == 2
