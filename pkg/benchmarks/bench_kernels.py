"""Time the compiled kernels against the numpy fallback and check they agree.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 3] [--threads 1]
"""

import argparse
import time

import numpy as np

from ockm._kernels import _fallback

try:
    from ockm._kernels import _ext
except ImportError:
    _ext = None


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--s", type=int, default=16)
    ap.add_argument("--k", type=int, default=256)
    ap.add_argument("--t", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _ext is None:
        raise SystemExit("compiled extension not built; run `pip install --no-build-isolation -e .`")

    rng = np.random.default_rng(args.seed)
    pts = rng.standard_normal((args.n, args.s))
    book = rng.standard_normal((args.s, args.k))
    books = rng.standard_normal((2, args.s, args.k))
    tables = rng.standard_normal((16, args.k))
    codes = rng.integers(0, args.k, size=(args.n * 10, 16)).astype(np.uint8)
    norms = rng.standard_normal(codes.shape[0])
    th = args.threads

    cases = [
        ("nearest", lambda m: m.nearest(pts, book, th)),
        (f"beam_encode c=2 t={args.t}", lambda m: m.beam_encode(pts, books, args.t, th)),
        ("adc_scan", lambda m: m.adc_scan(tables, codes, norms, th)),
    ]
    print(f"{'kernel':<24}{'numpy s':>10}{'cython s':>10}{'speedup':>9}  identical")
    for name, fn in cases:
        t_py, r_py = best_of(lambda: fn(_fallback), args.repeat)
        t_cy, r_cy = best_of(lambda: fn(_ext), args.repeat)
        print(f"{name:<24}{t_py:>10.4f}{t_cy:>10.4f}{t_py / t_cy:>8.1f}x  {same(r_py, r_cy)}")


if __name__ == "__main__":
    main()
