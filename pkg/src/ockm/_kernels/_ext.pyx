# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: nearest codeword, beam code search, ADC scan.

Summation order matches ``_fallback`` exactly (coordinate by coordinate), so
both backends return bit-identical results.  Build with -ffp-contract=off.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport parallel, prange
from libc.math cimport INFINITY
from libc.stdlib cimport free, malloc

cnp.import_array()

BACKEND = "cython"


cdef inline void _dists(const double* r, const double* book, double* out,
                        Py_ssize_t s, Py_ssize_t k) noexcept nogil:
    # book is (s, k) row-major; inner loop over k vectorises
    cdef Py_ssize_t j, kk
    cdef double rj, diff
    cdef const double* row
    for kk in range(k):
        out[kk] = 0.0
    for j in range(s):
        rj = r[j]
        row = book + j * k
        for kk in range(k):
            diff = rj - row[kk]
            out[kk] = out[kk] + diff * diff


cdef inline Py_ssize_t _argmin(const double* d, Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t kk, best = 0
    cdef double v = d[0]
    for kk in range(1, k):
        if d[kk] < v:
            v = d[kk]
            best = kk
    return best


cdef void _top_t(const double* d, Py_ssize_t k, int t,
                 Py_ssize_t* ti, double* td) noexcept nogil:
    # insertion into a sorted buffer; equal keys keep the lower index first
    cdef Py_ssize_t kk, pos
    cdef int filled = 0
    cdef double v
    for kk in range(k):
        v = d[kk]
        if filled == t and not (v < td[t - 1]):
            continue
        pos = filled if filled < t else t - 1
        while pos > 0 and v < td[pos - 1]:
            td[pos] = td[pos - 1]
            ti[pos] = ti[pos - 1]
            pos -= 1
        td[pos] = v
        ti[pos] = kk
        if filled < t:
            filled += 1


cdef double _gencode(const double* r, const double* books, int level, int c,
                     Py_ssize_t s, Py_ssize_t k, int t,
                     double* dist, double* res, Py_ssize_t* ti, double* td,
                     Py_ssize_t* out, Py_ssize_t* tmp,
                     long long* evals) noexcept nogil:
    cdef const double* book = books + level * s * k
    cdef double* d = dist + level * k
    cdef double* nxt
    cdef Py_ssize_t* lti
    cdef double* ltd
    cdef Py_ssize_t* sub
    cdef Py_ssize_t kk, j, q
    cdef int i
    cdef double best, e
    _dists(r, book, d, s, k)
    evals[0] += k
    if level == c - 1:
        kk = _argmin(d, k)
        out[level] = kk
        return d[kk]
    lti = ti + level * t
    ltd = td + level * t
    _top_t(d, k, t, lti, ltd)
    nxt = res + (level + 1) * s
    sub = tmp + level * c
    best = INFINITY
    for i in range(t):
        kk = lti[i]
        for j in range(s):
            nxt[j] = r[j] - book[j * k + kk]
        e = _gencode(nxt, books, level + 1, c, s, k, t, dist, res, ti, td,
                     sub, tmp, evals)
        if e < best:
            best = e
            out[level] = kk
            for q in range(level + 1, c):
                out[q] = sub[q]
    return best


def nearest(const double[:, ::1] points, const double[:, ::1] book, int threads=1):
    cdef Py_ssize_t n = points.shape[0], s = points.shape[1], k = book.shape[1]
    idx_arr = np.empty(n, dtype=np.int64)
    err_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[::1] err = err_arr
    cdef Py_ssize_t i, kk
    cdef double* d
    if n == 0:
        return idx_arr, err_arr
    with nogil, parallel(num_threads=max(1, threads)):
        d = <double*> malloc(k * sizeof(double))
        for i in prange(n, schedule="static"):
            _dists(&points[i, 0], &book[0, 0], d, s, k)
            kk = _argmin(d, k)
            idx[i] = kk
            err[i] = d[kk]
        free(d)
    return idx_arr, err_arr


def beam_encode(const double[:, ::1] points, const double[:, :, ::1] books, int t,
                int threads=1):
    cdef Py_ssize_t n = points.shape[0], s = points.shape[1]
    cdef int c = books.shape[0]
    cdef Py_ssize_t k = books.shape[2]
    if t < 1:
        t = 1
    if t > k:
        t = <int> k
    codes_arr = np.empty((n, c), dtype=np.int64)
    err_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] codes = codes_arr
    cdef double[::1] err = err_arr
    cdef long long total = 0
    cdef long long cnt
    cdef Py_ssize_t i, q
    cdef double* dist
    cdef double* res
    cdef double* td
    cdef Py_ssize_t* ti
    cdef Py_ssize_t* out
    cdef Py_ssize_t* tmp
    if n == 0:
        return codes_arr, err_arr, 0
    with nogil, parallel(num_threads=max(1, threads)):
        dist = <double*> malloc(c * k * sizeof(double))
        res = <double*> malloc(c * s * sizeof(double))
        td = <double*> malloc(c * t * sizeof(double))
        ti = <Py_ssize_t*> malloc(c * t * sizeof(Py_ssize_t))
        out = <Py_ssize_t*> malloc(c * sizeof(Py_ssize_t))
        tmp = <Py_ssize_t*> malloc(c * c * sizeof(Py_ssize_t))
        for i in prange(n, schedule="static"):
            cnt = 0
            err[i] = _gencode(&points[i, 0], &books[0, 0, 0], 0, c, s, k, t,
                              dist, res, ti, td, out, tmp, &cnt)
            for q in range(c):
                codes[i, q] = out[q]
            total += cnt
        free(dist)
        free(res)
        free(td)
        free(ti)
        free(out)
        free(tmp)
    return codes_arr, err_arr, total


def code_error(const double[:, ::1] points, const double[:, :, ::1] books,
               const cnp.int64_t[:, ::1] codes):
    cdef Py_ssize_t n = points.shape[0], s = points.shape[1], k = books.shape[2]
    cdef Py_ssize_t c = books.shape[0]
    err_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] err = err_arr
    cdef Py_ssize_t i, j, q
    cdef double r, acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(s):
                r = points[i, j]
                for q in range(c):
                    r = r - books[q, j, codes[i, q]]
                acc = acc + r * r
            err[i] = acc
    return err_arr


def adc_scan(const double[:, ::1] tables, const cnp.uint8_t[:, ::1] codes,
             const double[::1] norms, int threads=1):
    cdef Py_ssize_t n = codes.shape[0], mc = codes.shape[1]
    scores_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] scores = scores_arr
    cdef Py_ssize_t i, j
    cdef double acc
    with nogil:
        for i in prange(n, schedule="static", num_threads=max(1, threads)):
            acc = 0.0
            for j in range(mc):
                acc = acc + tables[j, codes[i, j]]
            scores[i] = acc + norms[i]
    return scores_arr
