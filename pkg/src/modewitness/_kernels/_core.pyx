# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: permanent sums for the lifted basis change and
shifted-histogram Hellinger distances."""

import itertools

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def lift_block(o, idx, norms):
    cdef double[:, ::1] O = np.ascontiguousarray(o, dtype=np.float64)
    cdef cnp.intp_t[:, ::1] I = np.ascontiguousarray(idx, dtype=np.intp)
    cdef double[::1] nrm = np.ascontiguousarray(norms, dtype=np.float64)
    cdef Py_ssize_t L = I.shape[0], N = I.shape[1]
    cdef cnp.intp_t[:, ::1] perms = np.ascontiguousarray(
        list(itertools.permutations(range(N))), dtype=np.intp).reshape(-1, N)
    cdef Py_ssize_t P = perms.shape[0]
    out_arr = np.zeros((L, L), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, l, k, s
    cdef double acc, term
    for i in range(L):
        for l in range(L):
            acc = 0.0
            for k in range(P):
                term = 1.0
                for s in range(N):
                    term *= O[I[i, perms[k, s]], I[l, s]]
                    if term == 0.0:
                        break
                acc += term
            out[i, l] = acc / nrm[l]
    return out_arr


def hellinger_shift(p, shift):
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
        shift = (int(shift[0]), 0)
    if arr.ndim != 2:
        from ._pycore import hellinger_shift as fallback
        return fallback(p, shift)
    cdef double[:, ::1] P = np.ascontiguousarray(arr)
    cdef Py_ssize_t n0 = P.shape[0], n1 = P.shape[1]
    cdef Py_ssize_t k0 = int(shift[0]), k1 = int(shift[1])
    cdef Py_ssize_t x, y, sx, sy
    cdef double total = 0.0, cross = 0.0, moved = 0.0, v
    for x in range(n0):
        for y in range(n1):
            total += P[x, y]
    for x in range(n0):
        sx = x - k0
        if sx < 0 or sx >= n0:
            continue
        for y in range(n1):
            sy = y - k1
            if sy < 0 or sy >= n1:
                continue
            v = P[sx, sy]
            moved += v
            cross += sqrt(v * P[x, y])
    return 0.5 * (total + moved - 2.0 * cross)
