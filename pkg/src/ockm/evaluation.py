"""Recall@R, mean overall ratio and the benchmark grid that writes CSV rows."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .codebooks import Variant, encode_points
from .errors import ConfigError
from .search import (
    build_point_norms,
    exact_distances,
    exact_knn_batch,
    knn_search_batch,
)
from .training import (
    TrainConfig,
    distortion,
    ockm_from_ckm,
    train_ckm,
    train_eckm,
    train_ockm,
    train_pq,
)

CSV_FIELDS = ["dataset", "variant", "distance_mode", "bits", "M", "K", "C", "T", "seed", "metric", "x", "value"]
RATIO_DEPTH = 10


def recall_positions(limit: int) -> list:
    """1, 2, 5, 10, 20, 50, ... up to ``limit``."""
    out, base = [], 1
    while True:
        for f in (1, 2, 5):
            if base * f > limit:
                return out
            out.append(base * f)
        base *= 10


def recall_at(results, truth, r: int) -> float:
    """Fraction of queries whose true nearest neighbour is among the first r results."""
    results = np.asarray(results)
    truth = np.asarray(truth)
    if truth.ndim == 1:
        truth = truth[:, None]
    if truth.shape[1] < 1:
        raise ConfigError("ground truth needs at least one id per query")
    hits = np.any(results[:, :r] == truth[:, :1], axis=1)
    return float(np.mean(hits))


def recall_curve(results, truth, positions) -> list:
    return [(r, recall_at(results, truth, r)) for r in positions]


@dataclass
class RatioReport:
    k: int
    ratio: float
    degenerate: int = 0


def mean_overall_ratio(queries, database, results, k: int = RATIO_DEPTH, truth=None) -> RatioReport:
    """Mean over queries of (1/k) sum_i ||q - r_i*|| / ||q - r_i||.

    r_i* is the i-th returned point and r_i the exact i-th neighbour; both
    distances are exact Euclidean.  A zero exact distance gives a term of 1
    if the returned point is also at distance 0; otherwise the query is
    reported as degenerate and left out.
    """
    queries = np.asarray(queries, dtype=np.float64)
    database = np.asarray(database, dtype=np.float64)
    results = np.asarray(results)
    if results.shape[1] < k:
        raise ConfigError(f"need at least {k} results per query, got {results.shape[1]}")
    if truth is None:
        truth = exact_knn_batch(queries, database, k)
    exact = np.asarray(truth.distances)[:, :k]
    per_query = []
    degenerate = 0
    for qi, q in enumerate(queries):
        approx = exact_distances(q, database[results[qi, :k]])
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = approx / exact[qi]
        zero = exact[qi] == 0
        terms[zero & (approx == 0)] = 1.0
        if np.any(zero & (approx > 0)):
            degenerate += 1
            continue
        per_query.append(float(np.mean(terms)))
    if degenerate:
        warnings.warn(f"{degenerate} queries had a zero exact distance against a non-zero result; excluded")
    value = float(np.mean(per_query)) if per_query else math.inf
    return RatioReport(k, value, degenerate)


# ---------------------------------------------------------------- benchmark

@dataclass
class Dataset:
    name: str
    train: np.ndarray
    database: np.ndarray
    queries: np.ndarray
    truth: np.ndarray | None = None  # (nq, >=1) exact neighbour ids, optional


def layout_for(variant: Variant, bits: int, k: int = 256) -> tuple:
    """(M, C) giving ``bits`` per code: C=1 for PQ/CKM, C=2 for ECKM/OCKM."""
    per = int(round(math.log2(k)))
    c = 1 if Variant(variant) in (Variant.PQ, Variant.CKM) else 2
    if bits % (per * c):
        raise ConfigError(f"{bits} bits is not a multiple of {per * c}")
    return bits // (per * c), c


def train_variant(variant: Variant, x, cfg: TrainConfig, warm_start: bool = False):
    """Train one variant; OCKM may warm-start from a CKM with the same code length."""
    variant = Variant(variant)
    if variant is Variant.PQ:
        return train_pq(x, cfg)
    if variant is Variant.CKM:
        return train_ckm(x, cfg)
    if variant is Variant.ECKM:
        return train_eckm(x, cfg)
    if warm_start:
        ckm_cfg = TrainConfig(m=cfg.m * cfg.c, k=cfg.k, c=1, t=cfg.t, iters=cfg.iters,
                              seed=cfg.seed, rel_tol=cfg.rel_tol, threads=cfg.threads)
        ckm, ckm_codes, _ = train_ckm(x, ckm_cfg)
        return train_ockm(x, cfg, init=ockm_from_ckm(ckm, ckm_codes, cfg.c))
    return train_ockm(x, cfg)


def evaluate_cell(ds: Dataset, model, train_codes, mode: str, t: int, threads: int = 1,
                  truth=None, db_codes=None, norms=None) -> list:
    """(metric, x, value) triples for one trained model and one distance mode."""
    n = ds.database.shape[0]
    positions = recall_positions(min(1000, n))
    if db_codes is None:
        db_codes, _ = encode_points(model, ds.database, t=t, threads=threads)
    if norms is None:
        norms = build_point_norms(model, db_codes)
    depth = max(positions[-1], RATIO_DEPTH)
    results = knn_search_batch(ds.queries, model, db_codes, norms, depth, mode, threads, t)
    if truth is None:
        truth = exact_knn_batch(ds.queries, ds.database, RATIO_DEPTH)
    out = [("recall", r, v) for r, v in recall_curve(results, truth.ids, positions)]
    rep = mean_overall_ratio(ds.queries, ds.database, results, RATIO_DEPTH, truth)
    out.append(("ratio", RATIO_DEPTH, rep.ratio))
    out.append(("distortion", 0, distortion(ds.train, model, train_codes)))
    return out


def cell_rows(ds_name, variant, mode, bits, model, t, seed, metrics) -> list:
    base = {
        "dataset": ds_name, "variant": Variant(variant).value, "distance_mode": mode,
        "bits": bits, "M": model.m, "K": model.k, "C": model.c,
        "T": t if Variant(variant) is Variant.OCKM else 0, "seed": seed,
    }
    return [dict(base, metric=mt, x=x, value=v) for mt, x, v in metrics]


def run_benchmark(datasets, variants=tuple(Variant), modes=("ad", "sd"), bits=(32, 64, 128),
                  seeds=(1,), k: int = 256, t: int = 10, iters: int = 100,
                  warm_start: bool = False, threads: int = 1) -> list:
    """Train/encode/search/evaluate every (dataset, variant, bits, seed) for each mode."""
    rows = []
    for ds in datasets:
        truth = exact_knn_batch(ds.queries, ds.database, RATIO_DEPTH)
        if ds.truth is not None:
            given = np.asarray(ds.truth)
            if not np.array_equal(given[:, 0], truth.ids[:, 0]):
                raise ConfigError(f"{ds.name}: supplied ground truth disagrees with exact search")
        for variant in variants:
            for b in bits:
                m, c = layout_for(variant, b, k)
                for seed in seeds:
                    cfg = TrainConfig(m=m, k=k, c=c, t=min(t, k), iters=iters, seed=seed, threads=threads)
                    model, codes, _ = train_variant(variant, ds.train, cfg, warm_start)
                    db_codes, _ = encode_points(model, ds.database, t=cfg.t, threads=threads)
                    norms = build_point_norms(model, db_codes)
                    for mode in modes:
                        metrics = evaluate_cell(ds, model, codes, mode, cfg.t, threads, truth, db_codes, norms)
                        rows.extend(cell_rows(ds.name, variant, mode, b, model, cfg.t, seed, metrics))
    check_rows(rows)
    return sort_rows(rows)


def check_rows(rows) -> None:
    """Recall curves must be monotone and ratios at least 1."""
    curves = {}
    for row in rows:
        key = tuple(row[f] for f in CSV_FIELDS[:9])
        if row["metric"] == "recall":
            curves.setdefault(key, []).append((row["x"], row["value"]))
        elif row["metric"] == "ratio" and not row["value"] >= 1 - 1e-12:
            raise AssertionError(f"mean overall ratio below 1 for {key}: {row['value']}")
    for key, pts in curves.items():
        vals = [v for _, v in sorted(pts)]
        if any(b < a for a, b in zip(vals, vals[1:])) or vals[-1] > 1:
            raise AssertionError(f"recall curve not monotone for {key}")


_METRIC_ORDER = {"distortion": 0, "ratio": 1, "recall": 2}


def sort_rows(rows) -> list:
    return sorted(
        rows,
        key=lambda r: (r["dataset"], r["variant"], r["distance_mode"], int(r["bits"]),
                       int(r["seed"]), _METRIC_ORDER.get(r["metric"], 9), r["metric"], float(r["x"])),
    )


def write_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in sort_rows(rows):
            writer.writerow({**row, "value": repr(float(row["value"]))})


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
