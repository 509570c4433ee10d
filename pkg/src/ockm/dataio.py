"""Vector file formats, synthetic data and the model / codes containers.

``.fvecs``, ``.bvecs`` and ``.ivecs`` store one record per vector:
a little-endian int32 dimension followed by that many float32, uint8 or int32
components.  Vectors come back as read-only float64 arrays of shape (n, p).
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .codebooks import Model, variant_from_tag, variant_tag
from .errors import ConfigError, FormatError, UnsupportedVersionError

MODEL_MAGIC = b"OCKM"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sIIIIIII")  # magic, version, variant, m, k, c, p, nb
_CODES_HEADER = struct.Struct("<II")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def as_vectors(x) -> np.ndarray:
    """Validate and return ``x`` as a C-contiguous float64 (n, p) array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise FormatError(f"expected a non-empty 2-D vector set, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise FormatError("vector set contains non-finite values")
    return x


def _read_records(path, dtype) -> np.ndarray:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size < 4:
        raise FormatError(f"{path}: empty or truncated vecs file")
    item = np.dtype(dtype).itemsize
    d = int(raw[:4].view("<i4")[0])
    if d < 1:
        raise FormatError(f"{path}: invalid dimension {d} in first record")
    rec = 4 + d * item
    if raw.size % rec:
        raise FormatError(f"{path}: truncated record or inconsistent dimensions (size {raw.size}, record {rec})")
    table = raw.reshape(-1, rec)
    dims = table[:, :4].copy().view("<i4").ravel()
    if np.any(dims != d):
        bad = int(np.flatnonzero(dims != d)[0])
        raise FormatError(f"{path}: record {bad} has dimension {int(dims[bad])}, expected {d}")
    return table[:, 4:].copy().view(np.dtype(dtype).newbyteorder("<"))


def _write_records(path, values: np.ndarray) -> None:
    n, d = values.shape
    table = np.empty((n, 4 + values.dtype.itemsize * d), dtype=np.uint8)
    table[:, :4] = np.full((n, 1), d, dtype="<i4").view(np.uint8)
    table[:, 4:] = np.ascontiguousarray(values).view(np.uint8).reshape(n, -1)
    table.tofile(os.fspath(path))


def read_fvecs(path) -> np.ndarray:
    x = _read_records(path, "<f4").astype(np.float64)
    if not np.all(np.isfinite(x)):
        raise FormatError(f"{os.fspath(path)}: non-finite component")
    return _freeze(x)


def write_fvecs(path, x) -> None:
    _write_records(path, np.asarray(x).astype("<f4"))


def read_bvecs(path) -> np.ndarray:
    return _freeze(_read_records(path, np.uint8).astype(np.float64))


def write_bvecs(path, x) -> None:
    x = np.asarray(x)
    if np.any((x < 0) | (x > 255)) or np.any(x != np.round(x)):
        raise FormatError("bvecs components must be integers in [0, 255]")
    _write_records(path, x.astype(np.uint8))


def read_ivecs(path) -> np.ndarray:
    """Id lists, one row per record, as int64."""
    return _freeze(_read_records(path, "<i4").astype(np.int64))


def write_ivecs(path, ids) -> None:
    ids = np.asarray(ids)
    if ids.ndim != 2:
        raise FormatError("ivecs data must be 2-D")
    _write_records(path, ids.astype("<i4"))


def read_vectors(path) -> np.ndarray:
    """Dispatch on extension: .fvecs, .bvecs or .ivecs (as floats)."""
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".fvecs":
        return read_fvecs(path)
    if ext == ".bvecs":
        return read_bvecs(path)
    if ext == ".ivecs":
        return _freeze(read_ivecs(path).astype(np.float64))
    raise FormatError(f"unknown vector file extension {ext!r} for {os.fspath(path)}")


def synth_clustered(n: int, p: int, clusters: int, spread: float, seed: int) -> np.ndarray:
    """Gaussian blobs around ``clusters`` centers drawn uniformly from [0, 1]^p."""
    if n < 1 or p < 1:
        raise ConfigError("n and p must be >= 1")
    if clusters < 1:
        raise ConfigError("clusters must be >= 1")
    if spread < 0:
        raise ConfigError("spread must be >= 0")
    rng = np.random.default_rng(seed)
    centers = rng.random((clusters, p))
    labels = rng.integers(0, clusters, size=n)
    x = centers[labels] + spread * rng.standard_normal((n, p))
    return _freeze(np.ascontiguousarray(x))


def save_model(path, model: Model) -> None:
    header = _MODEL_HEADER.pack(
        MODEL_MAGIC, MODEL_VERSION, variant_tag(model.variant),
        model.m, model.k, model.c, model.p, model.nb,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(model.rotation.astype("<f8").tobytes(order="C"))
        fh.write(model.books.astype("<f8").tobytes(order="C"))


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _MODEL_HEADER.size:
        raise FormatError(f"{os.fspath(path)}: too short for a model file")
    magic, version, tag, m, k, c, p, nb = _MODEL_HEADER.unpack_from(blob)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{os.fspath(path)}: bad magic {magic!r}")
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(f"{os.fspath(path)}: unsupported model version {version}")
    try:
        variant = variant_from_tag(tag)
    except KeyError:
        raise FormatError(f"{os.fspath(path)}: unknown variant tag {tag}") from None
    if m < 1 or k < 1 or c < 1 or nb < 1 or p % m:
        raise FormatError(f"{os.fspath(path)}: inconsistent dimensions m={m} k={k} c={c} p={p}")
    s = p // m
    n_rot, n_books = p * p, m * nb * s * k
    body = np.frombuffer(blob, dtype="<f8", offset=_MODEL_HEADER.size)
    if body.size != n_rot + n_books:
        raise FormatError(f"{os.fspath(path)}: payload has {body.size} values, expected {n_rot + n_books}")
    rotation = body[:n_rot].reshape(p, p).astype(np.float64)
    books = body[n_rot:].reshape(m, nb, s, k).astype(np.float64)
    try:
        return Model(variant, rotation, books, c)
    except ConfigError as exc:
        raise FormatError(f"{os.fspath(path)}: {exc}") from None


def save_codes(path, codes) -> None:
    codes = np.asarray(codes)
    if codes.ndim != 2:
        raise FormatError("codes must be 2-D")
    if codes.size and (codes.min() < 0 or codes.max() > 255):
        raise FormatError("codes file holds byte codes only (k <= 256)")
    with open(path, "wb") as fh:
        fh.write(_CODES_HEADER.pack(*codes.shape))
        fh.write(codes.astype(np.uint8).tobytes(order="C"))


def load_codes(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _CODES_HEADER.size:
        raise FormatError(f"{os.fspath(path)}: too short for a codes file")
    n, mt = _CODES_HEADER.unpack_from(blob)
    body = np.frombuffer(blob, dtype=np.uint8, offset=_CODES_HEADER.size)
    if body.size != n * mt:
        raise FormatError(f"{os.fspath(path)}: expected {n * mt} code bytes, found {body.size}")
    return body.reshape(n, mt).copy()
