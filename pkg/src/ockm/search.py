"""Lookup-table distances and exhaustive top-r retrieval.

For a query q with z = R^T q, the squared distance to a coded point splits
into a constant, M*C inner-product lookups and one per-point norm lookup::

    ||q - R D_hat b_i||^2 / 2 = ||q||^2 / 2 + sum_{m,c} table[m, c, b_i^{m,c}] + norm_i

Scores here drop the constant, so they are surrogates, not distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .codebooks import Model, encode_points
from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class QueryTables:
    """Per-query tables: ``inner[m*c + sel, k] = -(z^m)^T d_k^{m,sel}``."""

    inner: np.ndarray

    @property
    def count(self) -> int:
        return self.inner.shape[0]


@dataclass
class LookupCounter:
    lookups: int = 0
    additions: int = 0


def build_tables(model: Model, q) -> QueryTables:
    z = model.rotate(np.asarray(q, dtype=np.float64).reshape(1, -1))[0]
    inner = np.empty((model.m * model.c, model.k))
    for sub in range(model.m):
        zs = z[sub * model.s:(sub + 1) * model.s]
        books = model.selection_books(sub)
        for sel in range(model.c):
            inner[sub * model.c + sel] = -(zs @ books[sel])
    inner.flags.writeable = False
    return QueryTables(inner)


def build_point_norms(model: Model, codes) -> np.ndarray:
    """Half squared norm of each coded point, from the codes and books only."""
    y = model.reconstruct(codes)
    return 0.5 * np.einsum("ij,ij->i", y, y)


def dist_ad(tables: QueryTables, code, norm: float, counter: LookupCounter | None = None) -> float:
    """Surrogate asymmetric distance of one coded point (M*C + 1 lookups)."""
    inner = tables.inner
    acc = 0.0
    for j, idx in enumerate(code):
        acc = acc + float(inner[j, int(idx)])
    acc = acc + float(norm)
    if counter is not None:
        counter.lookups += inner.shape[0] + 1
        counter.additions += inner.shape[0] + 1
    return acc


def reconstruct_query(model: Model, code_q) -> np.ndarray:
    """q' = R D_hat b_q: the point a query code stands for."""
    return model.decode(np.asarray(code_q).reshape(1, -1))[0]


def dist_sd(model: Model, code_q, code_i, norm_i: float, tables: QueryTables | None = None,
            counter: LookupCounter | None = None) -> float:
    """Symmetric distance: the asymmetric distance from the reconstructed query."""
    if tables is None:
        tables = build_tables(model, reconstruct_query(model, code_q))
    return dist_ad(tables, code_i, norm_i, counter)


class SearchResult(NamedTuple):
    ids: np.ndarray
    scores: np.ndarray
    truncated: bool


def top_r(scores, r: int) -> np.ndarray:
    """Ids of the r smallest scores, ties broken by ascending id."""
    scores = np.asarray(scores)
    n = scores.shape[0]
    if r >= n:
        return np.argsort(scores, kind="stable")
    threshold = np.partition(scores, r - 1)[r - 1]
    cand = np.flatnonzero(scores <= threshold)
    order = np.argsort(scores[cand], kind="stable")
    return cand[order[:r]]


def scan_scores(model: Model, q, codes, norms, threads: int = 1) -> np.ndarray:
    tables = build_tables(model, q)
    return _kernels.adc_scan(tables.inner, codes, norms, threads)


def knn_search(q, model: Model, codes, norms, r: int, mode: str = "ad",
               threads: int = 1, t: int = 10) -> SearchResult:
    """Exhaustive scan with lookup-table distances.

    ``mode='sd'`` first encodes the query with the model and searches from
    its reconstruction.  ``r`` larger than the database returns everything
    with ``truncated`` set.
    """
    if r < 1:
        raise ConfigError("r must be >= 1")
    mode = mode.lower()
    q = np.asarray(q, dtype=np.float64)
    if mode == "sd":
        qcode, _ = encode_points(model, q.reshape(1, -1), t=t, threads=threads)
        q = reconstruct_query(model, qcode[0])
    elif mode != "ad":
        raise ConfigError(f"unknown distance mode {mode!r}")
    scores = scan_scores(model, q, codes, norms, threads)
    n = scores.shape[0]
    ids = top_r(scores, min(r, n))
    return SearchResult(ids, scores[ids], r > n)


def knn_search_batch(queries, model: Model, codes, norms, r: int, mode: str = "ad",
                     threads: int = 1, t: int = 10) -> np.ndarray:
    """Ranked ids for every query, shape (nq, min(r, n))."""
    queries = np.asarray(queries, dtype=np.float64)
    out = [knn_search(q, model, codes, norms, r, mode, threads, t).ids for q in queries]
    return np.array(out, dtype=np.int64).reshape(len(out), -1)


@dataclass
class GroundTruth:
    ids: np.ndarray
    distances: np.ndarray = field(default=None)


def exact_distances(q, database) -> np.ndarray:
    diff = np.asarray(database, dtype=np.float64) - np.asarray(q, dtype=np.float64)[None, :]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def exact_knn(q, database, r: int):
    """Exact Euclidean top-r (ids, distances), ties by id."""
    d = exact_distances(q, database)
    ids = top_r(d, min(r, d.shape[0]))
    return ids, d[ids]


def exact_knn_batch(queries, database, r: int) -> GroundTruth:
    res = [exact_knn(q, database, r) for q in np.asarray(queries, dtype=np.float64)]
    return GroundTruth(
        np.array([a for a, _ in res], dtype=np.int64),
        np.array([b for _, b in res]),
    )
