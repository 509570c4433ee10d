"""Command line: synth -> train -> encode -> search -> eval, plus gt and benchmark.

Exit codes: 0 ok, 2 configuration error, 3 format error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import _kernels
from .codebooks import Variant, encode_points
from .dataio import (
    load_codes,
    load_model,
    read_ivecs,
    read_vectors,
    save_codes,
    save_model,
    synth_clustered,
    write_fvecs,
    write_ivecs,
)
from .errors import ConfigError, FormatError, OckmError
from .evaluation import (
    RATIO_DEPTH,
    Dataset,
    cell_rows,
    check_rows,
    mean_overall_ratio,
    recall_curve,
    recall_positions,
    run_benchmark,
    train_variant,
    write_csv,
)
from .search import GroundTruth, build_point_norms, exact_knn_batch, knn_search_batch
from .training import TrainConfig, distortion


def _default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _need(*paths) -> None:
    for p in paths:
        if p is not None and not os.path.exists(p):
            raise FileNotFoundError(p)


def cmd_synth(args) -> int:
    x = synth_clustered(args.n, args.p, args.clusters, args.spread, args.seed)
    write_fvecs(args.out, x)
    print(f"wrote {x.shape[0]}x{x.shape[1]} vectors to {args.out}")
    return 0


def cmd_train(args) -> int:
    _need(args.input)
    x = read_vectors(args.input)
    cfg = TrainConfig(m=args.m, k=args.k, c=args.c, t=args.t, iters=args.iters, seed=args.seed,
                      rel_tol=args.rel_tol, threads=args.threads)
    model, codes, trace = train_variant(Variant(args.variant), x, cfg, warm_start=args.warm_start)
    save_model(args.model, model)
    if args.codes:
        save_codes(args.codes, codes)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "distortion", "seconds"])
            for i, (v, s) in enumerate(zip(trace.objective, trace.seconds)):
                w.writerow([i, repr(v), f"{s:.6f}"])
    print(f"variant={model.variant.value} M={model.m} K={model.k} C={model.c} "
          f"iterations={len(trace.objective) - 1} distortion={trace.objective[-1]!r}")
    return 0


def cmd_encode(args) -> int:
    _need(args.model, args.input)
    model = load_model(args.model)
    x = read_vectors(args.input)
    codes, _ = encode_points(model, x, t=args.t, threads=args.threads)
    save_codes(args.codes, codes)
    print(f"distortion={distortion(x, model, codes)!r}")
    return 0


def cmd_search(args) -> int:
    _need(args.model, args.codes, args.queries)
    model = load_model(args.model)
    codes = load_codes(args.codes)
    if codes.shape[1] != model.m * model.c:
        raise FormatError(f"codes have {codes.shape[1]} columns, model expects {model.m * model.c}")
    queries = read_vectors(args.queries)
    norms = build_point_norms(model, codes)
    if args.r > codes.shape[0]:
        print(f"warning: r={args.r} exceeds database size {codes.shape[0]}; returning all", file=sys.stderr)
    ids = knn_search_batch(queries, model, codes, norms, args.r, args.mode, args.threads, args.t)
    write_ivecs(args.out, ids)
    print(f"wrote {ids.shape[0]} ranked lists of {ids.shape[1]} ids to {args.out}")
    return 0


def cmd_gt(args) -> int:
    _need(args.database, args.queries)
    gt = exact_knn_batch(read_vectors(args.queries), read_vectors(args.database), args.r)
    write_ivecs(args.out, gt.ids)
    return 0


def cmd_eval(args) -> int:
    _need(args.results, args.queries, args.database, args.truth, args.model, args.train, args.train_codes)
    results = read_ivecs(args.results)
    queries = read_vectors(args.queries)
    database = read_vectors(args.database)
    truth = exact_knn_batch(queries, database, RATIO_DEPTH)
    if args.truth:
        given = read_ivecs(args.truth)
        truth = GroundTruth(given, truth.distances) if np.array_equal(given[:, 0], truth.ids[:, 0]) else None
        if truth is None:
            raise FormatError(f"{args.truth}: ground truth disagrees with exact search")
    positions = [r for r in recall_positions(min(1000, database.shape[0])) if r <= results.shape[1]]
    metrics = [("recall", r, v) for r, v in recall_curve(results, truth.ids, positions)]
    metrics.append(("ratio", RATIO_DEPTH, mean_overall_ratio(queries, database, results, RATIO_DEPTH, truth).ratio))
    if args.model:
        model = load_model(args.model)
        if args.train and args.train_codes:
            metrics.append(("distortion", 0, distortion(read_vectors(args.train), model, load_codes(args.train_codes))))
        rows = cell_rows(args.dataset, model.variant, args.mode, args.bits or int(round(model.code_bits)),
                         model, args.t, args.seed, metrics)
    else:
        base = {"dataset": args.dataset, "variant": "", "distance_mode": args.mode, "bits": args.bits or 0,
                "M": 0, "K": 0, "C": 0, "T": 0, "seed": args.seed}
        rows = [dict(base, metric=m, x=x, value=v) for m, x, v in metrics]
    check_rows(rows)
    if args.out:
        write_csv(args.out, rows)
    for row in rows:
        print(f"{row['metric']}@{row['x']}: {row['value']!r}")
    return 0


def cmd_benchmark(args) -> int:
    datasets = []
    for seed in args.data_seeds:
        x = synth_clustered(args.n + args.queries, args.p, args.clusters, args.spread, seed)
        db, qs = x[:args.n], x[args.n:]
        train = db[:args.train] if args.train else db
        datasets.append(Dataset(f"synth{seed}", train, db, qs))
    rows = run_benchmark(datasets, [Variant(v) for v in args.variants], args.modes, args.bits, args.seeds,
                         k=args.k, t=args.t, iters=args.iters, warm_start=args.warm_start,
                         threads=args.threads)
    write_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ockm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ockm 0.1.0 ({_kernels.BACKEND} kernels)")
    sub = ap.add_subparsers(dest="command", required=True)

    def threads(p):
        p.add_argument("--threads", type=int, default=_default_threads())

    p = sub.add_parser("synth", help="write a clustered synthetic dataset as .fvecs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--spread", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a quantizer")
    p.add_argument("--input", required=True)
    p.add_argument("--variant", choices=[v.value for v in Variant], required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, default=256)
    p.add_argument("--c", type=int, default=1)
    p.add_argument("--t", type=int, default=10)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rel-tol", type=float, default=1e-5)
    p.add_argument("--warm-start", action="store_true", help="OCKM only: start from a trained CKM")
    p.add_argument("--model", required=True)
    p.add_argument("--codes", help="also write the training codes")
    p.add_argument("--trace", help="per-iteration distortion CSV")
    threads(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="encode vectors with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--codes", required=True)
    p.add_argument("--t", type=int, default=10)
    threads(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("search", help="exhaustive lookup-table search; writes ranked ids as .ivecs")
    p.add_argument("--model", required=True)
    p.add_argument("--codes", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--r", type=int, default=100)
    p.add_argument("--mode", choices=["ad", "sd"], default="ad")
    p.add_argument("--t", type=int, default=10)
    p.add_argument("--out", required=True)
    threads(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("gt", help="exact nearest neighbours as .ivecs")
    p.add_argument("--database", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--r", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gt)

    p = sub.add_parser("eval", help="recall curve, mean overall ratio and distortion as CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--database", required=True)
    p.add_argument("--truth")
    p.add_argument("--model")
    p.add_argument("--train")
    p.add_argument("--train-codes")
    p.add_argument("--dataset", default="data")
    p.add_argument("--mode", choices=["ad", "sd"], default="ad")
    p.add_argument("--bits", type=int)
    p.add_argument("--t", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("benchmark", help="full grid on synthetic clustered data")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--p", type=int, default=32)
    p.add_argument("--clusters", type=int, default=64)
    p.add_argument("--spread", type=float, default=0.05)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--train", type=int, default=0, help="train on the first N database points (0 = all)")
    p.add_argument("--data-seeds", type=int, nargs="+", default=[1])
    p.add_argument("--variants", nargs="+", choices=[v.value for v in Variant], default=[v.value for v in Variant])
    p.add_argument("--modes", nargs="+", choices=["ad", "sd"], default=["ad", "sd"])
    p.add_argument("--bits", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--seeds", type=int, nargs="+", default=[1])
    p.add_argument("--k", type=int, default=256)
    p.add_argument("--t", type=int, default=10)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--warm-start", action="store_true")
    p.add_argument("--out", required=True)
    threads(p)
    p.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename or exc.args[0]}", file=sys.stderr)
        return ConfigError.exit_code
    except OckmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
