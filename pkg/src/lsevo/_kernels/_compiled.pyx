# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: pairwise squared distances and the greedy selector.

Same contract as _fallback; see that module for the semantics.
"""

from libc.math cimport INFINITY, NAN

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def sqdist_matrix(x, y):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    if xv.shape[1] != yv.shape[1]:
        raise ValueError("dimension mismatch")
    cdef Py_ssize_t m = xv.shape[0], n = yv.shape[0], d = xv.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for k in range(d):
                diff = xv[i, k] - yv[j, k]
                acc += diff * diff
            out[i, j] = acc
    return out_arr


def greedy_select(fps, util, double lam, n_select):
    cdef double[:, ::1] f = np.ascontiguousarray(fps, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(util, dtype=np.float64)
    cdef Py_ssize_t n = f.shape[0], d = f.shape[1]
    if u.shape[0] != n:
        raise ValueError("utilities do not match candidate count")
    cdef Py_ssize_t rounds = min(<Py_ssize_t> n_select, n) if n_select > 0 else 0

    sel_arr = np.empty(rounds, dtype=np.int64)
    thr_arr = np.empty(rounds, dtype=np.float64)
    unc_arr = np.empty(rounds, dtype=np.float64)
    fb_arr = np.zeros(rounds, dtype=np.uint8)
    cdef long long[::1] sel = sel_arr
    cdef double[::1] thr = thr_arr
    cdef double[::1] chosen_unc = unc_arr
    cdef unsigned char[::1] fb = fb_arr

    active_buf = np.ones(n, dtype=np.uint8)
    unc_buf = np.full(n, np.inf)
    cdef unsigned char[::1] active = active_buf
    cdef double[::1] unc = unc_buf

    cdef Py_ssize_t r, i, k, pick
    cdef double tau, max_u, best_util, acc, diff

    for r in range(rounds):
        if r == 0:
            pick = -1
            best_util = -INFINITY
            for i in range(n):
                if active[i] and u[i] > best_util:
                    best_util = u[i]
                    pick = i
            thr[0] = NAN
        else:
            max_u = -INFINITY
            for i in range(n):
                if active[i] and unc[i] > max_u:
                    max_u = unc[i]
            tau = lam * max_u
            pick = -1
            best_util = -INFINITY
            for i in range(n):
                if active[i] and unc[i] > tau and u[i] > best_util:
                    best_util = u[i]
                    pick = i
            if pick < 0:
                for i in range(n):
                    if active[i] and u[i] > best_util:
                        best_util = u[i]
                        pick = i
                fb[r] = 1
            thr[r] = tau
        sel[r] = pick
        chosen_unc[r] = unc[pick]
        active[pick] = 0
        if r + 1 < rounds:
            for i in range(n):
                if active[i]:
                    acc = 0.0
                    for k in range(d):
                        diff = f[i, k] - f[pick, k]
                        acc += diff * diff
                    if acc < unc[i]:
                        unc[i] = acc

    return sel_arr, thr_arr, unc_arr, fb_arr
