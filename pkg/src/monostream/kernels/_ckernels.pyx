# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled counterparts of :mod:`monostream.kernels._pure`.

Loop order and accumulation type mirror the numpy versions exactly; the
extension is built with ``-ffp-contract=off`` so no FMA is introduced.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport signbit

cnp.import_array()

ctypedef cnp.float32_t f32


cdef inline bint _below(f32 a, f32 b) noexcept nogil:
    # a < b in the total order where -0.0 sorts below +0.0
    if a < b:
        return True
    return a == b and signbit(a) and not signbit(b)


cdef inline f32 _pick(bint is_max, f32 a, f32 b) noexcept nogil:
    if is_max:
        return b if _below(a, b) else a
    return b if _below(b, a) else a


cdef inline bint _same(f32 a, f32 b) noexcept nogil:
    return a == b and signbit(a) == signbit(b)


def reduce_stack(bint is_max, stack):
    cdef const f32[:, ::1] s = np.ascontiguousarray(stack, dtype=np.float32)
    cdef Py_ssize_t n = s.shape[0], d = s.shape[1], i, j
    out = np.empty(d, dtype=np.float32)
    cdef f32[::1] o = out
    for j in range(d):
        o[j] = s[0, j]
    for i in range(1, n):
        for j in range(d):
            o[j] = _pick(is_max, o[j], s[i, j])
    return out


def reduce_rows(bint is_max, table, rows):
    cdef const f32[:, ::1] t = np.ascontiguousarray(table, dtype=np.float32)
    cdef const cnp.int64_t[::1] r = np.ascontiguousarray(rows, dtype=np.int64)
    cdef Py_ssize_t n = r.shape[0], d = t.shape[1], i, j
    out = np.zeros(d, dtype=np.float32)
    cdef f32[::1] o = out
    if n == 0:
        return out
    for j in range(d):
        o[j] = t[r[0], j]
    for i in range(1, n):
        for j in range(d):
            o[j] = _pick(is_max, o[j], t[r[i], j])
    return out


def segment_reduce(bint is_max, table, indptr, indices):
    cdef const f32[:, ::1] t = np.ascontiguousarray(table, dtype=np.float32)
    cdef const cnp.int64_t[::1] p = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const cnp.int64_t[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t n = p.shape[0] - 1, d = t.shape[1], v, e, j, src
    out = np.zeros((n, d), dtype=np.float32)
    cdef f32[:, ::1] o = out
    with nogil:
        for v in range(n):
            if p[v] == p[v + 1]:
                continue
            src = ix[p[v]]
            for j in range(d):
                o[v, j] = t[src, j]
            for e in range(p[v] + 1, p[v + 1]):
                src = ix[e]
                for j in range(d):
                    o[v, j] = _pick(is_max, o[v, j], t[src, j])
    return out


def matvec(W, x, b=None):
    cdef const f32[:, ::1] w = np.ascontiguousarray(W, dtype=np.float32)
    cdef const f32[::1] xv = np.ascontiguousarray(x, dtype=np.float32)
    cdef Py_ssize_t rows = w.shape[0], cols = w.shape[1], i, j
    cdef f32 acc
    cdef const f32[::1] bv
    out = np.empty(rows, dtype=np.float32)
    cdef f32[::1] o = out
    for i in range(rows):
        acc = 0.0
        for j in range(cols):
            acc = acc + w[i, j] * xv[j]
        o[i] = acc
    if b is not None:
        bv = np.ascontiguousarray(b, dtype=np.float32)
        for i in range(rows):
            o[i] = o[i] + bv[i]
    return out


def matmul_rows(X, W, b=None):
    cdef const f32[:, ::1] xm = np.ascontiguousarray(X, dtype=np.float32)
    cdef const f32[:, ::1] w = np.ascontiguousarray(W, dtype=np.float32)
    cdef Py_ssize_t n = xm.shape[0], rows = w.shape[0], cols = w.shape[1], r, i, j
    cdef f32 acc
    cdef const f32[::1] bv
    cdef bint has_bias = b is not None
    if has_bias:
        bv = np.ascontiguousarray(b, dtype=np.float32)
    out = np.empty((n, rows), dtype=np.float32)
    cdef f32[:, ::1] o = out
    with nogil:
        for r in range(n):
            for i in range(rows):
                acc = 0.0
                for j in range(cols):
                    acc = acc + w[i, j] * xm[r, j]
                if has_bias:
                    acc = acc + bv[i]
                o[r, i] = acc
    return out


def classify_positions(bint is_max, alpha_prev, del_reduced, add_reduced):
    cdef const f32[::1] a = np.ascontiguousarray(alpha_prev, dtype=np.float32)
    cdef const f32[::1] dl = np.ascontiguousarray(del_reduced, dtype=np.float32)
    cdef const f32[::1] ad
    cdef Py_ssize_t n = a.shape[0], i
    cdef bint any_reset = False, covered = True
    cdef bint has_add = add_reduced is not None
    if has_add:
        ad = np.ascontiguousarray(add_reduced, dtype=np.float32)
    reset = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] rs = reset
    for i in range(n):
        if _same(a[i], dl[i]):
            rs[i] = True
            any_reset = True
            if not has_add:
                covered = False
            elif is_max:
                if _below(ad[i], dl[i]):
                    covered = False
            elif _below(dl[i], ad[i]):
                covered = False
    if not any_reset:
        return reset, True
    return reset, covered
