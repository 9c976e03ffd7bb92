# cython: boundscheck=False, wraparound=False, cdivision=True
"""Hot kernels for the entrywise sampling operator.

Every loop streams the observations in a fixed order, so results are
bitwise reproducible.  The pure-python twin lives in _kernels_py.py.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def masked_rowdot(cnp.int64_t[::1] rows, cnp.int64_t[::1] cols,
                  double[:, ::1] a, double[:, ::1] b):
    """out[k] = dot(a[rows[k]], b[cols[k]])."""
    cdef Py_ssize_t nnz = rows.shape[0]
    cdef Py_ssize_t r = a.shape[1]
    out_arr = np.empty(nnz, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, c, i, j
    cdef double acc
    for k in range(nnz):
        i = rows[k]
        j = cols[k]
        acc = 0.0
        for c in range(r):
            acc += a[i, c] * b[j, c]
        out[k] = acc
    return out_arr


def scatter_add_rows(cnp.int64_t[::1] tgt, cnp.int64_t[::1] src,
                     double[::1] s, double[:, ::1] b, Py_ssize_t n_out):
    """out[tgt[k]] += s[k] * b[src[k]] for every observation k."""
    cdef Py_ssize_t nnz = tgt.shape[0]
    cdef Py_ssize_t r = b.shape[1]
    out_arr = np.zeros((n_out, r), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t k, c, i, j
    cdef double w
    for k in range(nnz):
        i = tgt[k]
        j = src[k]
        w = s[k]
        for c in range(r):
            out[i, c] += w * b[j, c]
    return out_arr


def sum_sq(double[::1] v):
    """Sequential sum of squares (fixed reduction order)."""
    cdef Py_ssize_t n = v.shape[0]
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(n):
        acc += v[k] * v[k]
    return acc
