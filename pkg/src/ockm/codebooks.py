"""Quantizer parameters, Lloyd's k-means and the per-subvector code searches.

Sub codebooks are stored with codewords as columns, shape ``(s, k)``, so a
model's ``books`` array has shape ``(m, nb, s, k)`` where ``nb`` is the number
of distinct sub codebooks per subvector: ``c`` for OCKM, 1 otherwise.  Codes
are ``(n, m * c)`` arrays laid out subvector-major, then by selection.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import ConfigError

ORTHO_TOL = 1e-8
BRUTE_FORCE_LIMIT = 10**6
DEFAULT_BEAM = 10


class Variant(str, Enum):
    PQ = "pq"
    CKM = "ckm"
    ECKM = "eckm"
    OCKM = "ockm"


_VARIANT_TAGS = {Variant.PQ: 0, Variant.CKM: 1, Variant.ECKM: 2, Variant.OCKM: 3}


def variant_tag(variant: Variant) -> int:
    return _VARIANT_TAGS[Variant(variant)]


def variant_from_tag(tag: int) -> Variant:
    for v, t in _VARIANT_TAGS.items():
        if t == tag:
            return v
    raise KeyError(tag)


@dataclass(frozen=True, eq=False)
class Model:
    """Rotation plus sub codebooks for one of the four quantizer variants."""

    variant: Variant
    rotation: np.ndarray
    books: np.ndarray
    c: int = 1

    def __post_init__(self):
        variant = Variant(self.variant)
        object.__setattr__(self, "variant", variant)
        rotation = np.ascontiguousarray(self.rotation, dtype=np.float64)
        books = np.ascontiguousarray(self.books, dtype=np.float64)
        if books.ndim != 4:
            raise ConfigError(f"books must have shape (m, nb, s, k), got {books.shape}")
        m, nb, s, k = books.shape
        if self.c < 1:
            raise ConfigError("c must be >= 1")
        if variant in (Variant.PQ, Variant.CKM) and self.c != 1:
            raise ConfigError(f"{variant.value} models use c = 1")
        expected_nb = self.c if variant is Variant.OCKM else 1
        if nb != expected_nb:
            raise ConfigError(f"{variant.value} model needs {expected_nb} book(s) per subvector, got {nb}")
        if rotation.shape != (m * s, m * s):
            raise ConfigError(f"rotation shape {rotation.shape} does not match p = {m * s}")
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(books))):
            raise ConfigError("model parameters must be finite")
        gram = rotation.T @ rotation
        if np.max(np.abs(gram - np.eye(m * s))) > ORTHO_TOL:
            raise ConfigError("rotation is not orthogonal")
        rotation.flags.writeable = False
        books.flags.writeable = False
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "books", books)

    @property
    def m(self) -> int:
        return self.books.shape[0]

    @property
    def nb(self) -> int:
        return self.books.shape[1]

    @property
    def s(self) -> int:
        return self.books.shape[2]

    @property
    def k(self) -> int:
        return self.books.shape[3]

    @property
    def p(self) -> int:
        return self.m * self.s

    @property
    def code_bits(self) -> float:
        return self.m * self.c * math.log2(self.k)

    def selection_books(self, sub: int) -> np.ndarray:
        """The ``(c, s, k)`` stack of books used by the c selections of subvector ``sub``."""
        b = self.books[sub]
        if self.nb == self.c:
            return b
        return np.ascontiguousarray(np.repeat(b, self.c, axis=0))

    def rotate(self, x) -> np.ndarray:
        """Rows z_i = R^T x_i."""
        return np.asarray(x, dtype=np.float64) @ self.rotation

    def subvector(self, z: np.ndarray, sub: int) -> np.ndarray:
        return np.ascontiguousarray(z[:, sub * self.s:(sub + 1) * self.s])

    def reconstruct(self, codes) -> np.ndarray:
        """Rotated-space reconstructions D_hat b_hat_i, shape (n, p)."""
        codes = np.asarray(codes)
        out = np.zeros((codes.shape[0], self.p))
        for sub in range(self.m):
            books = self.selection_books(sub)
            acc = out[:, sub * self.s:(sub + 1) * self.s]
            for sel in range(self.c):
                acc += books[sel][:, codes[:, sub * self.c + sel]].T
        return out

    def decode(self, codes) -> np.ndarray:
        """Reconstructions in the original space, R D_hat b_hat_i."""
        return self.reconstruct(codes) @ self.rotation.T

    def with_params(self, rotation=None, books=None) -> "Model":
        return Model(
            self.variant,
            self.rotation if rotation is None else rotation,
            self.books if books is None else books,
            self.c,
        )


class KMeansResult(NamedTuple):
    book: np.ndarray  # (s, k), codewords as columns
    assignments: np.ndarray
    history: list


def kmeanspp_init(x: np.ndarray, k: int, rng) -> np.ndarray:
    """Indices of k distinct seed rows chosen by D^2 sampling (k-means++)."""
    n = x.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    taken = np.zeros(n, dtype=bool)
    taken[chosen[0]] = True
    for i in range(1, k):
        w = np.where(taken, 0.0, d2)
        total = w.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=w / total))
        else:  # only duplicates of chosen rows remain
            nxt = int(rng.choice(np.flatnonzero(~taken)))
        chosen[i] = nxt
        taken[nxt] = True
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return chosen


def lloyd_kmeans(x, k: int, iters: int, seed: int) -> KMeansResult:
    """Lloyd's algorithm seeded with k-means++ (k distinct rows).

    ``history[t]`` is the within-cluster distortion right after the t-th
    assignment step.  An empty cluster is moved onto the point lying farthest
    from its own center, so all k codewords stay live.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k-means needs 1 <= k <= n, got k={k}, n={n}")
    if iters < 1:
        raise ConfigError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    book = np.ascontiguousarray(x[kmeanspp_init(x, k, rng)].T)
    history = []
    prev = None
    for _ in range(iters):
        assign, err = _kernels.nearest(x, book)
        history.append(float(np.sum(err)))
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign
        book = _update_centers(x, assign, book)
    return KMeansResult(book, assign, history)


def _update_centers(x, assign, book):
    k = book.shape[1]
    counts = np.bincount(assign, minlength=k)
    new = book.copy()
    live = counts > 0
    for j in range(x.shape[1]):
        sums = np.bincount(assign, weights=x[:, j], minlength=k)
        new[j, live] = sums[live] / counts[live]
    empty = np.flatnonzero(~live)
    if empty.size:
        resid = x - new[:, assign].T
        dist = np.einsum("ij,ij->i", resid, resid)
        far = np.argsort(-dist, kind="stable")[: empty.size]
        new[:, empty] = x[far].T
    return np.ascontiguousarray(new)


def _as_points(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return np.ascontiguousarray(z.reshape(1, -1) if z.ndim == 1 else z)


def _as_books(books) -> np.ndarray:
    books = np.asarray(books, dtype=np.float64)
    if books.ndim == 2:
        books = books[None]
    return np.ascontiguousarray(books)


def encode_eckm_batch(points, book, c: int):
    """Matching pursuit with c picks from one book; returns (codes (n, c), error)."""
    if c < 1:
        raise ConfigError("c must be >= 1")
    r = _as_points(points)
    book = np.ascontiguousarray(book, dtype=np.float64)
    codes = np.empty((r.shape[0], c), dtype=np.int64)
    err = np.zeros(r.shape[0])
    for sel in range(c):
        idx, err = _kernels.nearest(r, book)
        codes[:, sel] = idx
        r = r - book[:, idx].T
    return codes, err


def encode_eckm(z, book, c: int):
    """Greedy code for one subvector: the c picked indices (a multiset) and the error."""
    codes, err = encode_eckm_batch(z, book, c)
    return codes[0], float(err[0])


def encode_ockm_batch(points, books, t: int = DEFAULT_BEAM, threads: int = 1):
    """Beam code search over a ``(c, s, k)`` book stack.

    Returns ``(codes (n, c), error (n,), evals)`` where ``evals`` counts
    codeword distance evaluations; each costs s coordinate operations.
    """
    books = _as_books(books)
    if not 1 <= t <= books.shape[2]:
        raise ConfigError(f"beam width must be in [1, {books.shape[2]}], got {t}")
    return _kernels.beam_encode(_as_points(points), books, int(t), threads)


def encode_ockm(z, books, t: int = DEFAULT_BEAM):
    codes, err, _ = encode_ockm_batch(z, books, t)
    return codes[0], float(err[0])


def brute_force_encode(z, books):
    """Exhaustive search over all k**c index tuples (lexicographically first on ties)."""
    books = _as_books(books)
    c, s, k = books.shape
    if k**c > BRUTE_FORCE_LIMIT:
        raise ConfigError(f"brute force over {k}**{c} tuples exceeds the {BRUTE_FORCE_LIMIT} limit")
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    tuples = np.array(list(itertools.product(range(k), repeat=c)), dtype=np.int64)
    r = np.broadcast_to(z, (tuples.shape[0], s)).copy()
    for sel in range(c):
        r = r - books[sel][:, tuples[:, sel]].T
    err = np.zeros(tuples.shape[0])
    for j in range(s):
        err = err + r[:, j] * r[:, j]
    best = int(np.argmin(err))
    return tuples[best], float(err[best])


def optimality_rate(points, books, t: int) -> float:
    """Fraction of points on which the beam search hits the exhaustive optimum."""
    points = _as_points(points)
    _, beam_err, _ = encode_ockm_batch(points, books, t)
    hits = sum(beam_err[i] == brute_force_encode(points[i], books)[1] for i in range(points.shape[0]))
    return hits / points.shape[0]


def code_error(points, books, codes) -> np.ndarray:
    """Per-point squared error of ``codes`` (n, c) against a ``(c, s, k)`` book stack."""
    return _kernels.code_error(
        _as_points(points), _as_books(books), np.ascontiguousarray(codes, dtype=np.int64)
    )


def encode_points(model: Model, x, t: int = DEFAULT_BEAM, threads: int = 1):
    """Encode rows of ``x`` with ``model``.

    Returns ``(codes, errors)``: codes ``(n, m*c)`` uint8 (int64 if k > 256)
    and per-subvector errors ``(n, m)``.
    """
    z = model.rotate(x)
    n = z.shape[0]
    dtype = np.uint8 if model.k <= 256 else np.int64
    codes = np.empty((n, model.m * model.c), dtype=dtype)
    errors = np.empty((n, model.m))
    for sub in range(model.m):
        zs = model.subvector(z, sub)
        if model.variant is Variant.OCKM:
            cs, err, _ = encode_ockm_batch(zs, model.books[sub], min(t, model.k), threads)
        elif model.variant is Variant.ECKM:
            cs, err = encode_eckm_batch(zs, model.books[sub, 0], model.c)
        else:
            idx, err = _kernels.nearest(zs, model.books[sub, 0], threads)
            cs = idx[:, None]
        codes[:, sub * model.c:(sub + 1) * model.c] = cs
        errors[:, sub] = err
    return codes, errors
