"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import os
import time

import numpy as np
import pytest
from conftest import report

from ockm.codebooks import (
    Model,
    Variant,
    brute_force_encode,
    encode_ockm_batch,
    encode_points,
    optimality_rate,
)
from ockm.dataio import read_vectors, read_ivecs, synth_clustered
from ockm.evaluation import (
    Dataset,
    check_rows,
    mean_overall_ratio,
    recall_at,
    run_benchmark,
)
from ockm.search import (
    LookupCounter,
    build_point_norms,
    build_tables,
    dist_ad,
    dist_sd,
    exact_knn_batch,
    knn_search_batch,
    reconstruct_query,
)
from ockm.training import (
    TrainConfig,
    distortion,
    ockm_from_ckm,
    ockm_from_eckm,
    train_ckm,
    train_eckm,
    train_ockm,
)


def verdict(num: int, ok: bool, detail: str) -> None:
    report(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _rel(a, b):
    return abs(a - b) / abs(b)


def _random_ockm(rng, m, c, s, k):
    q, _ = np.linalg.qr(rng.standard_normal((m * s, m * s)))
    return Model(Variant.OCKM, q, rng.standard_normal((m, c, s, k)), c)


def test_c01_monotone_descent():
    x = synth_clustered(10**4, 32, 64, 0.05, seed=1)
    start = time.perf_counter()
    _, _, trace = train_ockm(x, TrainConfig(m=4, k=256, c=2, t=10, iters=100, seed=1, threads=1))
    secs = time.perf_counter() - start
    v = trace.objective
    worst = max((b - a) / a for a, b in zip(v, v[1:]))
    ok = worst <= 1e-9 and secs < 180
    verdict(1, ok, f"OCKM trace non-increasing over {len(v) - 1} iterations "
                   f"(worst relative step {worst:+.3e}, {v[0]:.1f} -> {v[-1]:.1f}), {secs:.0f}s single-threaded")


def test_c02_beam_optimal_at_full_width():
    rng = np.random.default_rng(2)
    books = rng.standard_normal((2, 8, 16))
    pts = rng.standard_normal((1000, 8))
    _, err, _ = encode_ockm_batch(pts, books, 16)
    hits = sum(err[i] == brute_force_encode(pts[i], books)[1] for i in range(1000))
    verdict(2, hits == 1000, f"beam at T=K matches brute force exactly on {hits}/1000 points")


def test_c03_optimality_rate_monotone():
    rng = np.random.default_rng(3)
    books = rng.standard_normal((2, 8, 16))
    pts = rng.standard_normal((1000, 8))
    rates = [optimality_rate(pts, books, t) for t in (1, 2, 4, 8, 16)]
    ok = all(b >= a for a, b in zip(rates, rates[1:])) and rates[-1] == 1.0
    verdict(3, ok, "optimality rate over T=1,2,4,8,16: " + ", ".join(f"{r:.3f}" for r in rates))


def test_c04_ckm_to_ockm_construction():
    x = synth_clustered(5000, 32, 64, 0.05, seed=4)
    ckm, codes, _ = train_ckm(x, TrainConfig(m=8, k=16, t=16, iters=50, seed=4))
    f_ck = distortion(x, ckm, codes)
    model, ocodes = ockm_from_ckm(ckm, codes, 2)
    f_con = distortion(x, model, ocodes)
    _, _, trace = train_ockm(x, TrainConfig(m=4, k=16, c=2, t=10, iters=50, seed=4),
                             init=(model, ocodes))
    worst = max(trace.objective)
    ok = _rel(f_con, f_ck) <= 1e-12 and worst <= f_ck
    verdict(4, ok, f"constructed OCKM distortion rel diff {_rel(f_con, f_ck):.1e}; "
                   f"refinement {f_ck:.3f} -> {trace.objective[-1]:.3f}, max over trace {worst:.3f}")


def test_c05_eckm_to_ockm_construction():
    x = synth_clustered(5000, 32, 64, 0.05, seed=5)
    eckm, codes, _ = train_eckm(x, TrainConfig(m=4, k=16, c=2, iters=50, seed=5))
    f_e = distortion(x, eckm, codes)
    model, ocodes = ockm_from_eckm(eckm, codes)
    f_o = distortion(x, model, ocodes)
    verdict(5, _rel(f_o, f_e) <= 1e-12, f"ECKM {f_e:.6f} vs constructed OCKM {f_o:.6f} (rel diff {_rel(f_o, f_e):.1e})")


def test_c06_distance_identity_and_lookups():
    rng = np.random.default_rng(6)
    model = _random_ockm(rng, 4, 2, 4, 32)
    codes = rng.integers(0, 32, size=(1000, 8)).astype(np.uint8)
    norms = build_point_norms(model, codes)
    y = model.decode(codes)
    worst, sd_equal = 0.0, True
    for q in rng.standard_normal((100, model.p)):
        tables = build_tables(model, q)
        lhs = np.array([dist_ad(tables, codes[i], norms[i]) for i in range(1000)]) + 0.5 * (q @ q)
        rhs = 0.5 * np.sum((q - y) ** 2, axis=1)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / rhs)))
    for j in range(100):
        qt = build_tables(model, reconstruct_query(model, codes[j]))
        sd_equal &= all(dist_sd(model, codes[j], codes[i], norms[i]) == dist_ad(qt, codes[i], norms[i])
                        for i in range(0, 1000, 7))
    counter = LookupCounter()
    dist_ad(build_tables(model, y[0]), codes[0], norms[0], counter)
    ok = worst <= 1e-9 and sd_equal and counter.lookups == 9
    verdict(6, ok, f"AD identity worst rel err {worst:.1e}; SD == AD on reconstruction: {sd_equal}; "
                   f"lookups per distance at M=4, C=2: {counter.lookups}")


def test_c07_search_matches_oracle():
    data = synth_clustered(10100, 32, 64, 0.05, seed=7)
    db, qs = data[:10000], data[10000:]
    model, _, _ = train_ockm(db, TrainConfig(m=4, k=64, c=2, t=10, iters=15, seed=7))
    codes, _ = encode_points(model, db)
    got = knn_search_batch(qs, model, codes, build_point_norms(model, codes), 100)
    y = model.decode(codes)
    same = 0
    for qi, q in enumerate(qs):
        d = np.sum((q - y) ** 2, axis=1)
        same += np.array_equal(got[qi], np.argsort(d, kind="stable")[:100])
    verdict(7, same == 100, f"top-100 ids identical to reconstruction-scan oracle for {same}/100 queries")


@pytest.mark.slow
def test_c08_desk_scale_direction():
    n, nq = 10**5, 1000
    start = time.perf_counter()
    d_ck, d_oc, r_ck, r_oc = [], [], [], []
    for seed in (1, 2, 3):
        data = synth_clustered(n + nq, 64, 256, 0.05, seed=seed)
        x, qs = data[:n], data[n:]
        truth = exact_knn_batch(qs, x, 1).ids
        ckm, ck_codes, _ = train_ckm(x, TrainConfig(m=8, k=256, iters=100, seed=seed))
        ockm, oc_codes, _ = train_ockm(x, TrainConfig(m=4, k=256, c=2, t=10, iters=100, seed=seed),
                                       init=ockm_from_ckm(ckm, ck_codes, 2))
        d_ck.append(distortion(x, ckm, ck_codes))
        d_oc.append(distortion(x, ockm, oc_codes))
        for model, out in ((ckm, r_ck), (ockm, r_oc)):
            db_codes, _ = encode_points(model, x)
            ids = knn_search_batch(qs, model, db_codes, build_point_norms(model, db_codes), 10)
            out.append(recall_at(ids, truth, 10))
    secs = time.perf_counter() - start
    dc, do, rc, ro = map(np.mean, (d_ck, d_oc, r_ck, r_oc))
    ok = do <= dc and ro >= rc - 0.01 and secs < 1800
    verdict(8, ok, f"64-bit mean distortion OCKM {do:.1f} vs CKM {dc:.1f}; "
                   f"recall@10 AD OCKM {ro:.3f} vs CKM {rc:.3f}; {secs / 60:.1f} min")


def test_c09_metric_sanity():
    rng = np.random.default_rng(9)
    db, qs = rng.standard_normal((2000, 16)), rng.standard_normal((50, 16))
    exact = exact_knn_batch(qs, db, 10)
    ratio = mean_overall_ratio(qs, db, exact.ids, 10).ratio
    data = synth_clustered(2100, 16, 20, 0.1, seed=9)
    ds = Dataset("synth", data[:2000], data[:2000], data[2000:])
    rows = run_benchmark([ds], list(Variant), ("ad", "sd"), (16, 32), (1,), k=16, t=4, iters=5)
    try:
        check_rows(rows)
        grid_ok = True
    except AssertionError:
        grid_ok = False
    min_ratio = min(r["value"] for r in rows if r["metric"] == "ratio")
    ok = ratio == 1.0 and grid_ok and min_ratio >= 1.0
    verdict(9, ok, f"ratio of exact results {ratio!r}; {len(rows)} grid rows with monotone recall "
                   f"curves: {grid_ok}; smallest ratio {min_ratio:.4f}")


SIFT = os.environ.get("OCKM_SIFT1M")


@pytest.mark.slow
@pytest.mark.skipif(not SIFT, reason="set OCKM_SIFT1M to the directory holding sift_*.fvecs")
def test_c10_sift1m():
    base = read_vectors(os.path.join(SIFT, "sift_base.fvecs"))
    learn = read_vectors(os.path.join(SIFT, "sift_learn.fvecs"))
    qs = read_vectors(os.path.join(SIFT, "sift_query.fvecs"))
    truth = read_ivecs(os.path.join(SIFT, "sift_groundtruth.ivecs"))[:, :1]
    threads = len(os.sched_getaffinity(0))
    ckm, ck_codes, _ = train_ckm(learn, TrainConfig(m=8, k=256, iters=100, seed=1, threads=threads))
    ockm, _, _ = train_ockm(learn, TrainConfig(m=4, k=256, c=2, t=10, iters=100, seed=1, threads=threads),
                            init=ockm_from_ckm(ckm, ck_codes, 2))
    recall = []
    for model in (ckm, ockm):
        codes, _ = encode_points(model, base, threads=threads)
        ids = knn_search_batch(qs, model, codes, build_point_norms(model, codes), 10, threads=threads)
        recall.append(recall_at(ids, truth, 10))
    verdict(10, recall[1] >= recall[0], f"SIFT1M recall@10 AD OCKM {recall[1]:.3f} vs CKM {recall[0]:.3f}")

