"""Hot kernels, compiled when available.

The Cython extension is used when it imports; otherwise (or when the
environment variable ``OCKM_PURE_PYTHON`` is set to a non-empty value other
than ``0``) the numpy implementations in ``_fallback`` are used.  Both expose
``nearest``, ``beam_encode``, ``code_error`` and ``adc_scan`` with the same
signatures and bit-identical results.
"""

import os

from . import _fallback

if os.environ.get("OCKM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _ext as _impl
    except ImportError:  # extension not built
        _impl = _fallback

import numpy as np

BACKEND = _impl.BACKEND


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def nearest(points, book, threads=1):
    """Index of the closest column of ``book`` (s, k) for each row; ties go low."""
    return _impl.nearest(_f64(points), _f64(book), int(threads))


def beam_encode(points, books, t, threads=1):
    return _impl.beam_encode(_f64(points), _f64(books), int(t), int(threads))


def code_error(points, books, codes):
    return _impl.code_error(_f64(points), _f64(books), np.ascontiguousarray(codes, dtype=np.int64))


def adc_scan(tables, codes, norms, threads=1):
    return _impl.adc_scan(
        _f64(tables), np.ascontiguousarray(codes, dtype=np.uint8), _f64(norms), int(threads)
    )

__all__ = ["BACKEND", "nearest", "beam_encode", "code_error", "adc_scan", "_fallback"]
