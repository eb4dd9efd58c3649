# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tree kernels; drop-in replacements for ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

ctypedef cnp.int64_t i64


cdef struct Pair:
    double v
    double y


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef double va = (<Pair*>a).v
    cdef double vb = (<Pair*>b).v
    if va < vb:
        return -1
    if va > vb:
        return 1
    return 0


def best_split(const double[:, ::1] X, const i64[::1] y, const i64[::1] idx,
               features, Py_ssize_t min_leaf):
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t i, k
    cdef i64 f
    cdef i64 best_f = -1
    cdef double best_t = 0.0
    cdef double best_s = np.inf
    cdef double total = 0.0, cl, cr, nl, nr, score, thr
    if n < 2 * min_leaf:
        return best_f, best_t, best_s
    for i in range(n):
        total += <double>y[idx[i]]
    cdef Pair* buf = <Pair*>malloc(n * sizeof(Pair))
    if buf == NULL:
        raise MemoryError()
    try:
        for f in features:
            for i in range(n):
                buf[i].v = X[idx[i], f]
                buf[i].y = <double>y[idx[i]]
            qsort(buf, n, sizeof(Pair), _cmp_pair)
            cl = 0.0
            for i in range(n - 1):
                cl += buf[i].y
                nl = <double>(i + 1)
                nr = <double>(n - i - 1)
                if nl < min_leaf or nr < min_leaf:
                    continue
                if not (buf[i + 1].v > buf[i].v):
                    continue
                cr = total - cl
                score = 2.0 * cl * (nl - cl) / nl + 2.0 * cr * (nr - cr) / nr
                if score < best_s:
                    best_s = score
                    best_f = f
                    thr = (buf[i].v + buf[i + 1].v) / 2.0
                    if thr >= buf[i + 1].v:
                        thr = buf[i].v
                    best_t = thr
    finally:
        free(buf)
    return best_f, best_t, best_s


def forest_predict(const i64[::1] feature, const double[::1] threshold,
                   const i64[::1] left, const i64[::1] right,
                   const double[::1] value, const i64[::1] roots, X):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], i, t
    cdef Py_ssize_t ntrees = roots.shape[0]
    cdef i64 node
    out = np.zeros(n)
    cdef double[::1] o = out
    with nogil:
        for t in range(ntrees):
            for i in range(n):
                node = roots[t]
                while feature[node] >= 0:
                    if Xv[i, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                o[i] += value[node]
        for i in range(n):
            o[i] = o[i] / ntrees
    return out


cdef double _expect(const i64[::1] feature, const double[::1] threshold,
                    const i64[::1] left, const i64[::1] right,
                    const double[::1] value, const double[::1] cover,
                    const double[:, ::1] Xv, Py_ssize_t row, i64 mask, i64 node) noexcept nogil:
    cdef i64 f = feature[node]
    if f < 0:
        return value[node]
    if (mask >> f) & 1:
        if Xv[row, f] <= threshold[node]:
            return _expect(feature, threshold, left, right, value, cover, Xv, row, mask, left[node])
        return _expect(feature, threshold, left, right, value, cover, Xv, row, mask, right[node])
    return (_expect(feature, threshold, left, right, value, cover, Xv, row, mask, left[node])
            * (cover[left[node]] / cover[node])
            + _expect(feature, threshold, left, right, value, cover, Xv, row, mask, right[node])
            * (cover[right[node]] / cover[node]))


def tree_expectations(const i64[::1] feature, const double[::1] threshold,
                      const i64[::1] left, const i64[::1] right,
                      const double[::1] value, const double[::1] cover,
                      const i64[::1] roots, const i64[::1] ends, X, masks):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const i64[::1] mk = np.ascontiguousarray(masks, dtype=np.int64)
    cdef Py_ssize_t n = Xv.shape[0], nm = mk.shape[0], ntrees = roots.shape[0]
    cdef Py_ssize_t i, m, t
    out = np.zeros((n, nm))
    cdef double[:, ::1] o = out
    with nogil:
        for t in range(ntrees):
            for i in range(n):
                for m in range(nm):
                    o[i, m] += _expect(feature, threshold, left, right, value, cover,
                                       Xv, i, mk[m], roots[t])
        for i in range(n):
            for m in range(nm):
                o[i, m] = o[i, m] / ntrees
    return out
