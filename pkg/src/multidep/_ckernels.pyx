# cython: language_level=3
"""Compiled hot loops. Same signatures and semantics as ``_pykernels``.

All loops run without the GIL so replicate batches can be spread over
threads. Matrices are symmetric, so only the upper triangle is visited.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef enum:
    KIND_PRODUCT = 0
    KIND_TOTAL = 1


cdef inline double _reduce(double* vals, Py_ssize_t n, int kind, int m, double* esp) noexcept nogil:
    cdef Py_ssize_t i, r
    cdef double prod, tot, a
    if kind == KIND_PRODUCT:
        prod = 1.0
        for i in range(n):
            prod *= vals[i]
        return prod
    if kind == KIND_TOTAL:
        prod = 1.0
        tot = 0.0
        for i in range(n):
            a = vals[i]
            prod *= 1.0 + a
            tot += a
        return prod - 1.0 - tot
    esp[0] = 1.0
    for r in range(1, m + 1):
        esp[r] = 0.0
    for i in range(n):
        a = vals[i]
        for r in range(m, 0, -1):
            esp[r] += a * esp[r - 1]
    return esp[m]


def pairwise_power(x, double beta):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    xa = x
    cdef Py_ssize_t N = xa.shape[0], d = xa.shape[1]
    out = np.zeros((N, N), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[:, ::1] xv = xa
    cdef Py_ssize_t j, k, q
    cdef double s, t
    with nogil:
        for j in range(N):
            for k in range(j + 1, N):
                if d == 1:
                    s = fabs(xv[j, 0] - xv[k, 0])
                else:
                    s = 0.0
                    for q in range(d):
                        t = xv[j, q] - xv[k, q]
                        s += t * t
                    s = sqrt(s)
                if beta != 1.0:
                    s = pow(s, beta)
                o[j, k] = s
                o[k, j] = s
    return out


def double_center(dist, weights=None):
    cdef double[:, ::1] b = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t N = b.shape[0], j, k
    out = np.empty((N, N), dtype=np.float64)
    cdef double[:, ::1] o = out
    row_arr = np.zeros(N, dtype=np.float64)
    cdef double[::1] row = row_arr
    cdef double[::1] w
    cdef double grand = 0.0, s
    cdef bint weighted = weights is not None
    if weighted:
        w = np.ascontiguousarray(weights, dtype=np.float64)
    with nogil:
        for j in range(N):
            s = 0.0
            if weighted:
                for k in range(N):
                    s += b[j, k] * w[k]
            else:
                for k in range(N):
                    s += b[j, k]
                s /= N
            row[j] = s
        for j in range(N):
            if weighted:
                grand += row[j] * w[j]
            else:
                grand += row[j]
        if not weighted:
            grand /= N
        for j in range(N):
            for k in range(N):
                o[j, k] = -b[j, k] + row[j] + row[k] - grand
    return out


def product_sum(stack, weights, int kind, int m):
    cdef double[:, :, ::1] a = np.ascontiguousarray(stack, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], N = a.shape[1], i, j, k
    cdef double total = 0.0, rowsum, f
    cdef double* vals = <double*> malloc(n * sizeof(double))
    cdef double* esp = <double*> malloc((m + 1) * sizeof(double))
    try:
        with nogil:
            for j in range(N):
                rowsum = 0.0
                for k in range(j + 1, N):
                    for i in range(n):
                        vals[i] = a[i, j, k]
                    rowsum += w[k] * _reduce(vals, n, kind, m, esp)
                for i in range(n):
                    vals[i] = a[i, j, j]
                f = _reduce(vals, n, kind, m, esp)
                total += w[j] * (2.0 * rowsum + w[j] * f)
    finally:
        free(vals)
        free(esp)
    return total


def permuted_product_sum(stack, perms, int kind, int m):
    cdef double[:, :, ::1] a = np.ascontiguousarray(stack, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] p = np.ascontiguousarray(perms, dtype=np.int64)
    cdef Py_ssize_t n = a.shape[0], N = a.shape[1], i, j, k
    cdef double total = 0.0, rowsum
    cdef double* vals = <double*> malloc(n * sizeof(double))
    cdef double* esp = <double*> malloc((m + 1) * sizeof(double))
    try:
        with nogil:
            for j in range(N):
                rowsum = 0.0
                for k in range(j + 1, N):
                    for i in range(n):
                        vals[i] = a[i, p[i, j], p[i, k]]
                    rowsum += _reduce(vals, n, kind, m, esp)
                for i in range(n):
                    vals[i] = a[i, p[i, j], p[i, j]]
                total += 2.0 * rowsum + _reduce(vals, n, kind, m, esp)
    finally:
        free(vals)
        free(esp)
    return total / (<double> N * N)


def resampled_product_sum(dists, idx, bint normalize, int kind, int m):
    cdef double[:, :, ::1] b = np.ascontiguousarray(dists, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] ix = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t n = b.shape[0], N = b.shape[1], i, j, k
    rows_arr = np.zeros((n, N), dtype=np.float64)
    cdef double[:, ::1] rows = rows_arr
    grand_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] grand = grand_arr
    cdef double total = 0.0, rowsum, s, scale
    cdef double* vals = <double*> malloc(n * sizeof(double))
    cdef double* esp = <double*> malloc((m + 1) * sizeof(double))
    cdef double* inv = <double*> malloc(n * sizeof(double))
    try:
        with nogil:
            for i in range(n):
                scale = 0.0
                for j in range(N):
                    s = 0.0
                    for k in range(N):
                        s += b[i, ix[i, j], ix[i, k]]
                    rows[i, j] = s / N
                    scale += s
                grand[i] = scale / (<double> N * N)
                if normalize:
                    inv[i] = 1.0 / grand[i] if grand[i] > 0.0 else 0.0
                else:
                    inv[i] = 1.0
            for j in range(N):
                rowsum = 0.0
                for k in range(j, N):
                    for i in range(n):
                        vals[i] = inv[i] * (-b[i, ix[i, j], ix[i, k]] + rows[i, j] + rows[i, k] - grand[i])
                    if k == j:
                        rowsum += 0.5 * _reduce(vals, n, kind, m, esp)
                    else:
                        rowsum += _reduce(vals, n, kind, m, esp)
                total += 2.0 * rowsum
    finally:
        free(vals)
        free(esp)
        free(inv)
    return total / (<double> N * N)
