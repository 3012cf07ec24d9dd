# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled envelope kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def envelope(denom, b, bint maximize, double tie_tol):
    cdef const double[:, ::1] D = np.ascontiguousarray(denom, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = D.shape[0], l = D.shape[1], j, k, best, first, count
    rho_arr = np.empty(n, dtype=np.float64)
    win_arr = np.empty(n, dtype=np.intp)
    tie_arr = np.empty(n, dtype=np.bool_)
    mar_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] rho = rho_arr
    cdef Py_ssize_t[::1] win = win_arr
    cdef cnp.npy_bool[::1] tie = tie_arr
    cdef double[::1] mar = mar_arr
    cdef double q, top, gap, thr, second
    with nogil:
        for j in range(n):
            best = 0
            top = bv[0] / D[j, 0]
            for k in range(1, l):
                q = bv[k] / D[j, k]
                if (maximize and q > top) or (not maximize and q < top):
                    top = q
                    best = k
            thr = tie_tol * top
            first = -1
            count = 0
            second = INFINITY
            for k in range(l):
                q = bv[k] / D[j, k]
                gap = top - q if maximize else q - top
                if gap <= thr:
                    count += 1
                    if first < 0:
                        first = k
                if k != best and gap < second:
                    second = gap
            rho[j] = top
            win[j] = first
            tie[j] = count > 1
            mar[j] = second
    return rho_arr, win_arr, tie_arr, mar_arr


def best_other(denom, b, Py_ssize_t i, bint maximize):
    cdef const double[:, ::1] D = np.ascontiguousarray(denom, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = D.shape[0], l = D.shape[1], j, k
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double q, top
    with nogil:
        for j in range(n):
            top = -INFINITY if maximize else INFINITY
            for k in range(l):
                if k == i:
                    continue
                q = bv[k] / D[j, k]
                if (maximize and q > top) or (not maximize and q < top):
                    top = q
            out[j] = top
    return out_arr
