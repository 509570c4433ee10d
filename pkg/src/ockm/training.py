"""Coordinate-descent trainers for PQ, CKM, ECKM and OCKM.

The rotation and codebook steps are exact least-squares solves; the code
step uses the variant's encoder and only replaces a point's subvector code
when the new one is strictly better.  Each step is additionally kept only if
it does not raise the objective, so every trace is non-increasing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .codebooks import (
    DEFAULT_BEAM,
    Model,
    Variant,
    encode_eckm_batch,
    encode_ockm_batch,
    lloyd_kmeans,
)
from .dataio import as_vectors
from .errors import ConfigError
from .linalg import lsq_from_normal, rotation_from_cross


@dataclass(frozen=True)
class TrainConfig:
    m: int
    k: int = 256
    c: int = 1
    t: int = DEFAULT_BEAM
    iters: int = 100
    seed: int = 0
    rel_tol: float = 1e-5
    threads: int = 1

    def check(self, n: int, p: int) -> None:
        if self.m < 1 or p % self.m:
            raise ConfigError(f"dimension {p} is not divisible by m={self.m}")
        if not 1 <= self.k <= 256:
            raise ConfigError(f"k must be in [1, 256] for byte codes, got {self.k}")
        if self.c < 1:
            raise ConfigError("c must be >= 1")
        if not 1 <= self.t <= self.k:
            raise ConfigError(f"beam width t must be in [1, k={self.k}], got {self.t}")
        if self.iters < 1:
            raise ConfigError("iters must be >= 1")
        if n < self.k:
            raise ConfigError(f"need at least k={self.k} training points, got {n}")


@dataclass
class TrainTrace:
    """Objective after initialisation (entry 0) and after every iteration."""

    objective: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def record(self, value: float, start: float) -> None:
        self.objective.append(float(value))
        self.seconds.append(time.perf_counter() - start)


def distortion(x, model: Model, codes) -> float:
    """Sum over points of ||x_i - R D_hat b_hat_i||^2 (pairwise summation)."""
    diff = np.asarray(x, dtype=np.float64) - model.decode(codes)
    return float(np.sum(diff * diff))


def _as_codes(codes) -> np.ndarray:
    return np.ascontiguousarray(codes, dtype=np.int64)


def _byte_codes(codes) -> np.ndarray:
    return np.ascontiguousarray(codes, dtype=np.uint8)


# ---------------------------------------------------------------- PQ

def train_pq(x, cfg: TrainConfig):
    """Independent Lloyd k-means per subvector; the rotation stays the identity."""
    x = as_vectors(x)
    n, p = x.shape
    cfg.check(n, p)
    if cfg.c != 1:
        raise ConfigError("PQ uses c = 1")
    start = time.perf_counter()
    s = p // cfg.m
    books = np.empty((cfg.m, 1, s, cfg.k))
    codes = np.empty((n, cfg.m), dtype=np.int64)
    histories = []
    for sub in range(cfg.m):
        res = lloyd_kmeans(x[:, sub * s:(sub + 1) * s], cfg.k, cfg.iters, cfg.seed + sub)
        books[sub, 0] = res.book
        codes[:, sub] = res.assignments
        histories.append(res.history)
    model = Model(Variant.PQ, np.eye(p), books, 1)
    trace = TrainTrace()
    longest = max(len(h) for h in histories)
    for it in range(longest):
        trace.record(sum(h[min(it, len(h) - 1)] for h in histories), start)
    final = distortion(x, model, codes)
    if final < trace.objective[-1]:
        trace.record(final, start)
    return model, _byte_codes(codes), trace


# ---------------------------------------------------------------- rotated variants

def _init_model(x, variant: Variant, cfg: TrainConfig) -> Model:
    """R = I and every sub codebook filled with distinct sampled data subvectors."""
    n, p = x.shape
    s = p // cfg.m
    nb = cfg.c if variant is Variant.OCKM else 1
    rng = np.random.default_rng(cfg.seed)
    books = np.empty((cfg.m, nb, s, cfg.k))
    for sub in range(cfg.m):
        sx = x[:, sub * s:(sub + 1) * s]
        if nb * cfg.k <= n:
            rows = rng.choice(n, size=nb * cfg.k, replace=False).reshape(nb, cfg.k)
        else:
            rows = np.stack([rng.choice(n, size=cfg.k, replace=False) for _ in range(nb)])
        for b in range(nb):
            books[sub, b] = sx[rows[b]].T
    return Model(variant, np.eye(p), books, cfg.c)


def _encode_sub(model: Model, zs, sub: int, cfg: TrainConfig):
    if model.variant is Variant.OCKM:
        codes, err, _ = encode_ockm_batch(zs, model.books[sub], min(cfg.t, model.k), cfg.threads)
        return codes, err
    if model.variant is Variant.ECKM:
        return encode_eckm_batch(zs, model.books[sub, 0], model.c)
    idx, err = _kernels.nearest(zs, model.books[sub, 0], cfg.threads)
    return idx[:, None], err


def _normal_equations(zs, sub_codes, nb: int, k: int):
    """Z B^T and B B^T for one subvector, without forming the indicator matrix."""
    n, c = sub_codes.shape
    width = nb * k
    offsets = (np.arange(c) * k) if nb == c else np.zeros(c, dtype=np.int64)
    cols = sub_codes + offsets[None, :]
    zbt = np.zeros((zs.shape[1], width))
    for sel in range(c):
        for j in range(zs.shape[1]):
            zbt[j] += np.bincount(cols[:, sel], weights=zs[:, j], minlength=width)
    bbt = np.zeros(width * width)
    for a in range(c):
        for b in range(c):
            bbt += np.bincount(cols[:, a] * width + cols[:, b], minlength=width * width)
    return zbt, bbt.reshape(width, width)


def _update_rotation(x, model: Model, codes, current: float):
    y = model.reconstruct(codes)
    candidate = model.with_params(rotation=rotation_from_cross(x.T @ y))
    value = distortion(x, candidate, codes)
    if value <= current:
        return candidate, value
    return model, current


def _update_books(x, model: Model, codes) -> Model:
    z = model.rotate(x)
    books = model.books.copy()
    c, nb, k, s = model.c, model.nb, model.k, model.s
    for sub in range(model.m):
        zs = model.subvector(z, sub)
        sc = codes[:, sub * c:(sub + 1) * c]
        zbt, bbt = _normal_equations(zs, sc, nb, k)
        solved = lsq_from_normal(zbt, bbt).reshape(s, nb, k).transpose(1, 0, 2)
        old = np.sum(_kernels.code_error(zs, model.selection_books(sub), sc))
        stack = solved if nb == c else np.repeat(solved, c, axis=0)
        new = np.sum(_kernels.code_error(zs, stack, sc))
        if new <= old:
            books[sub] = solved
    return model.with_params(books=books)


def _update_codes(x, model: Model, codes, cfg: TrainConfig, guarded: bool = True):
    z = model.rotate(x)
    codes = codes.copy()
    c = model.c
    for sub in range(model.m):
        zs = model.subvector(z, sub)
        new_codes, new_err = _encode_sub(model, zs, sub, cfg)
        block = codes[:, sub * c:(sub + 1) * c]
        if guarded:
            old_err = _kernels.code_error(zs, model.selection_books(sub), block)
            take = new_err < old_err
            block[take] = new_codes[take]
        else:
            block[:] = new_codes
    return codes


def _descend(x, model: Model, codes, cfg: TrainConfig, trace: TrainTrace, start: float):
    current = distortion(x, model, codes)
    trace.record(current, start)
    for _ in range(cfg.iters):
        model, current = _update_rotation(x, model, codes, current)
        model = _update_books(x, model, codes)
        codes = _update_codes(x, model, codes, cfg)
        value = distortion(x, model, codes)
        previous = trace.objective[-1]
        trace.record(value, start)
        if previous <= 0 or (previous - value) < cfg.rel_tol * previous:
            break
        current = value
    return model, codes


def _train_rotated(x, variant: Variant, cfg: TrainConfig, init):
    x = as_vectors(x)
    n, p = x.shape
    cfg.check(n, p)
    start = time.perf_counter()
    trace = TrainTrace()
    if init is None:
        model = _init_model(x, variant, cfg)
        codes = _update_codes(x, model, np.zeros((n, cfg.m * cfg.c), dtype=np.int64), cfg, guarded=False)
    else:
        model, codes = init
        if model.variant is not variant or model.c != cfg.c or model.m != cfg.m or model.k != cfg.k:
            raise ConfigError("warm-start model does not match the training configuration")
        codes = _as_codes(codes)
        if codes.shape != (n, model.m * model.c):
            raise ConfigError(f"warm-start codes have shape {codes.shape}, expected {(n, model.m * model.c)}")
    model, codes = _descend(x, model, codes, cfg, trace, start)
    return model, _byte_codes(codes), trace


def train_ckm(x, cfg: TrainConfig, init=None):
    if cfg.c != 1:
        raise ConfigError("CKM uses c = 1")
    return _train_rotated(x, Variant.CKM, cfg, init)


def train_eckm(x, cfg: TrainConfig, init=None):
    return _train_rotated(x, Variant.ECKM, cfg, init)


def train_ockm(x, cfg: TrainConfig, init=None):
    """Beam-search codes over c distinct books; ``init=(model, codes)`` warm-starts from a feasible point."""
    return _train_rotated(x, Variant.OCKM, cfg, init)


# ---------------------------------------------------------------- constructions

def ockm_from_ckm(ckm: Model, codes, c: int):
    """Group every c consecutive CKM subvectors into one OCKM subvector.

    Each group member's codebook is zero-padded into its own block of rows,
    so reconstructions and code length are unchanged.
    """
    if ckm.variant not in (Variant.CKM, Variant.PQ):
        raise ConfigError("ockm_from_ckm expects a CKM (or PQ) model")
    if c < 1 or ckm.m % c:
        raise ConfigError(f"m={ckm.m} is not divisible by c={c}")
    m2, s, k = ckm.m // c, ckm.s, ckm.k
    books = np.zeros((m2, c, c * s, k))
    for grp in range(m2):
        for q in range(c):
            books[grp, q, q * s:(q + 1) * s] = ckm.books[grp * c + q, 0]
    model = Model(Variant.OCKM, ckm.rotation, books, c)
    return model, np.array(codes, copy=True)


def selections_to_counts(selections, k: int) -> np.ndarray:
    """One count vector of length k from c selected indices."""
    return np.bincount(np.asarray(selections, dtype=np.int64), minlength=k)


def counts_to_selections(counts) -> np.ndarray:
    """Split a count vector into its one-hot selections, ascending index order."""
    counts = np.asarray(counts, dtype=np.int64)
    return np.repeat(np.arange(counts.size), counts)


def ockm_from_eckm(eckm: Model, codes):
    """Copy each ECKM sub codebook c times and split every count vector into one-hots."""
    if eckm.variant is not Variant.ECKM:
        raise ConfigError("ockm_from_eckm expects an ECKM model")
    c = eckm.c
    books = np.repeat(eckm.books, c, axis=1)
    codes = np.asarray(codes)
    out = np.empty_like(codes)
    for sub in range(eckm.m):
        block = codes[:, sub * c:(sub + 1) * c]
        # the ascending split of a count vector is the sorted multiset
        out[:, sub * c:(sub + 1) * c] = np.sort(block, axis=1)
    return Model(Variant.OCKM, eckm.rotation, books, c), out


def eckm_from_ckm(ckm: Model, codes, c: int):
    """ECKM point with CKM's objective: books scaled by 1/c, each index picked c times."""
    if ckm.variant not in (Variant.CKM, Variant.PQ):
        raise ConfigError("eckm_from_ckm expects a CKM (or PQ) model")
    if c < 1:
        raise ConfigError("c must be >= 1")
    model = Model(Variant.ECKM, ckm.rotation, ckm.books / c, c)
    return model, np.repeat(np.asarray(codes), c, axis=1)
