"""Pure numpy versions of the hot kernels.

Every routine accumulates squared differences one coordinate at a time, in
coordinate order, exactly like the compiled kernels.  The two backends are
therefore bit-identical, not merely close.
"""

import numpy as np

BACKEND = "numpy"

# rows per block when materialising (rows, k) distance tables
_BLOCK = 4096


def _sq_dists(points, book):
    """(n, k) squared distances between rows of ``points`` and columns of ``book``."""
    acc = np.zeros((points.shape[0], book.shape[1]))
    for j in range(points.shape[1]):
        diff = points[:, j, None] - book[j][None, :]
        acc += diff * diff
    return acc


def nearest(points, book, threads=1):
    n = points.shape[0]
    idx = np.empty(n, dtype=np.int64)
    err = np.empty(n)
    for lo in range(0, n, _BLOCK):
        d = _sq_dists(points[lo:lo + _BLOCK], book)
        best = np.argmin(d, axis=1)
        idx[lo:lo + _BLOCK] = best
        err[lo:lo + _BLOCK] = d[np.arange(d.shape[0]), best]
    return idx, err


def _gencode(residual, books, level, t):
    """Vectorised GenCodeOck over a block of residuals; returns (codes, err, evals)."""
    n = residual.shape[0]
    book = books[level]
    k = book.shape[1]
    d = _sq_dists(residual, book)
    evals = n * k
    if level == books.shape[0] - 1:
        best = np.argmin(d, axis=1)
        return best[:, None], d[np.arange(n), best], evals
    order = np.argsort(d, axis=1, kind="stable")[:, :t]
    best_err = np.full(n, np.inf)
    best_codes = np.zeros((n, books.shape[0] - level), dtype=np.int64)
    for rank in range(order.shape[1]):
        cand = order[:, rank]
        sub = residual - book[:, cand].T
        codes, err, e = _gencode(sub, books, level + 1, t)
        evals += e
        better = err < best_err
        best_err[better] = err[better]
        best_codes[better, 0] = cand[better]
        best_codes[better, 1:] = codes[better]
    return best_codes, best_err, evals


def beam_encode(points, books, t, threads=1):
    n, c = points.shape[0], books.shape[0]
    t = max(1, min(int(t), books.shape[2]))
    codes = np.empty((n, c), dtype=np.int64)
    err = np.empty(n)
    evals = 0
    step = max(1, _BLOCK // max(1, t))
    for lo in range(0, n, step):
        cb, eb, e = _gencode(points[lo:lo + step], books, 0, t)
        codes[lo:lo + step] = cb
        err[lo:lo + step] = eb
        evals += e
    return codes, err, evals


def code_error(points, books, codes):
    r = points.copy()
    for c in range(books.shape[0]):
        r = r - books[c][:, codes[:, c]].T
    err = np.zeros(points.shape[0])
    for j in range(points.shape[1]):
        err = err + r[:, j] * r[:, j]
    return err


def adc_scan(tables, codes, norms, threads=1):
    acc = np.zeros(codes.shape[0])
    for j in range(codes.shape[1]):
        acc = acc + tables[j][codes[:, j]]
    return acc + norms
