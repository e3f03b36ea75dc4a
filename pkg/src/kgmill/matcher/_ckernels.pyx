# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel: grouped minimum pairwise cosine distance.

Computes, for each code's block of vectors, the minimum cosine distance to
any query vector, without materializing the full similarity matrix.
"""

from libc.math cimport sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


def group_min_cosine(
    double[:, ::1] queries,
    double[:, ::1] codes,
    cnp.int64_t[::1] offsets,
):
    """Minimum cosine distance between query rows and each code's row block.

    offsets has one more entry than there are groups; group g owns code rows
    offsets[g]:offsets[g+1] (non-empty). All rows must have nonzero norm.
    """
    cdef Py_ssize_t m = queries.shape[0]
    cdef Py_ssize_t d = queries.shape[1]
    cdef Py_ssize_t total = codes.shape[0]
    cdef Py_ssize_t n_groups = offsets.shape[0] - 1

    out_arr = np.empty(n_groups, dtype=np.float64)
    qnorm_arr = np.empty(m, dtype=np.float64)
    cnorm_arr = np.empty(total, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] qnorm = qnorm_arr
    cdef double[::1] cnorm = cnorm_arr

    cdef Py_ssize_t i, j, k, g, start, stop
    cdef double acc, dot, dist, best

    for i in range(m):
        acc = 0.0
        for k in range(d):
            acc += queries[i, k] * queries[i, k]
        qnorm[i] = sqrt(acc)
    for j in range(total):
        acc = 0.0
        for k in range(d):
            acc += codes[j, k] * codes[j, k]
        cnorm[j] = sqrt(acc)

    for g in range(n_groups):
        start = offsets[g]
        stop = offsets[g + 1]
        best = 2.0 + 1.0
        for j in range(start, stop):
            for i in range(m):
                dot = 0.0
                for k in range(d):
                    dot += queries[i, k] * codes[j, k]
                dist = 1.0 - dot / (qnorm[i] * cnorm[j])
                if dist < best:
                    best = dist
        out[g] = best
    return out_arr
