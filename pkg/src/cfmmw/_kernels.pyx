# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Semantics match ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def reverse_delete(xi_in, Py_ssize_t L):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xi = np.ascontiguousarray(xi_in, dtype=np.float64)
    cdef Py_ssize_t M = xi.shape[0], K = xi.shape[1]
    served_arr = np.ones((M, K), dtype=np.uint8)
    if K <= L:
        return served_arr.astype(bool)
    cdef unsigned char[:, ::1] served = served_arr
    cdef Py_ssize_t[::1] deg = np.full(M, K, dtype=np.intp)
    cdef double[::1] energy = np.zeros(K)
    cdef Py_ssize_t[::1] count = np.zeros(K, dtype=np.intp)
    cdef Py_ssize_t it, m, k, bm, bk, kmin
    cdef double e1, e2, post, other, best, bw, w
    for it in range(M * (K - L)):
        for k in range(K):
            energy[k] = 0.0
            count[k] = 0
        for m in range(M):
            for k in range(K):
                if served[m, k]:
                    energy[k] += xi[m, k]
                    count[k] += 1
        # smallest and second smallest energy; first index wins ties (stable)
        kmin = 0
        for k in range(1, K):
            if energy[k] < energy[kmin]:
                kmin = k
        e1 = energy[kmin]
        e2 = INFINITY
        for k in range(K):
            if k != kmin and energy[k] < e2:
                e2 = energy[k]
        best = -INFINITY
        bw = INFINITY
        bm = -1
        bk = -1
        for m in range(M):
            if deg[m] <= L:
                continue
            for k in range(K):
                if not served[m, k]:
                    continue
                if count[k] == 1:
                    post = 0.0
                else:
                    post = energy[k] - xi[m, k]
                other = e2 if k == kmin else e1
                if other < post:
                    post = other
                w = xi[m, k]
                if post > best or (post == best and w < bw):
                    best = post
                    bw = w
                    bm = m
                    bk = k
        served[bm, bk] = 0
        deg[bm] -= 1
    return served_arr.astype(bool)
