# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled nested least-squares kernels (same contract as ``_kernels_py``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, NAN

cnp.import_array()


def lagged_gram(X, Py_ssize_t K):
    cdef cnp.ndarray[double, ndim=2, mode="c"] Xa = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    cdef Py_ssize_t B = Xa.shape[0], n = Xa.shape[1], N = n - K
    cdef cnp.ndarray[double, ndim=3, mode="c"] out = np.empty((B, K + 1, K + 1))
    cdef double[:, ::1] xv = Xa
    cdef double[:, :, ::1] S = out
    cdef Py_ssize_t b, i, j, t
    cdef double acc, invN = 1.0 / N
    with nogil:
        for b in range(B):
            for j in range(K + 1):
                acc = 0.0
                for t in range(N):
                    acc = acc + xv[b, K + t] * xv[b, K - j + t]
                S[b, 0, j] = acc
                S[b, j, 0] = acc
            for i in range(K):
                for j in range(i, K):
                    S[b, i + 1, j + 1] = (S[b, i, j] + xv[b, K - 1 - i] * xv[b, K - 1 - j]
                                          - xv[b, n - 1 - i] * xv[b, n - 1 - j])
                    S[b, j + 1, i + 1] = S[b, i + 1, j + 1]
            for i in range(K + 1):
                for j in range(K + 1):
                    S[b, i, j] = S[b, i, j] * invN
    return out


def nested_fit(S_in, double rel_tol=1e-12):
    cdef cnp.ndarray[double, ndim=3, mode="c"] Sa = np.ascontiguousarray(S_in, dtype=np.float64)
    cdef Py_ssize_t B = Sa.shape[0], K = Sa.shape[1] - 1
    cdef cnp.ndarray[double, ndim=2, mode="c"] sig = np.empty((B, K))
    cdef cnp.ndarray[double, ndim=3, mode="c"] coef = np.zeros((B, K, K))
    cdef cnp.ndarray[int, ndim=1, mode="c"] status = np.zeros(B, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=2, mode="c"] Lm = np.zeros((K, K))
    cdef cnp.ndarray[double, ndim=2, mode="c"] Lim = np.zeros((K, K))
    cdef cnp.ndarray[double, ndim=1, mode="c"] wm = np.zeros(K)
    cdef double[:, :, ::1] S = Sa
    cdef double[:, ::1] sv = sig
    cdef double[:, :, ::1] cv = coef
    cdef int[::1] st = status
    cdef double[:, ::1] L = Lm
    cdef double[:, ::1] Li = Lim
    cdef double[::1] w = wm
    cdef Py_ssize_t b, i, j, k, bad
    cdef double acc, piv, floor, run
    with nogil:
        for b in range(B):
            floor = rel_tol * S[b, 1, 1]
            bad = 0
            for j in range(K):
                acc = S[b, j + 1, j + 1]
                for k in range(j):
                    acc = acc - L[j, k] * L[j, k]
                if acc <= floor:
                    bad = j + 1
                    break
                piv = sqrt(acc)
                L[j, j] = piv
                for i in range(j + 1, K):
                    acc = S[b, i + 1, j + 1]
                    for k in range(j):
                        acc = acc - L[i, k] * L[j, k]
                    L[i, j] = acc / piv
            if bad:
                st[b] = <int>bad
                for k in range(K):
                    if k + 1 < bad:
                        continue
                    sv[b, k] = NAN
                    for i in range(K):
                        cv[b, k, i] = NAN
                # lower orders are still valid
            for j in range(K if bad == 0 else bad - 1):
                acc = S[b, 0, j + 1]
                for k in range(j):
                    acc = acc - L[j, k] * w[k]
                w[j] = acc / L[j, j]
                Li[j, j] = 1.0 / L[j, j]
                for i in range(j):
                    acc = 0.0
                    for k in range(i, j):
                        acc = acc + L[j, k] * Li[k, i]
                    Li[j, i] = -acc / L[j, j]
            run = S[b, 0, 0]
            for j in range(K if bad == 0 else bad - 1):
                run = run - w[j] * w[j]
                sv[b, j] = run
                cv[b, j, j] = -Li[j, j] * w[j]
                for i in range(j):
                    cv[b, j, i] = cv[b, j - 1, i] - Li[j, i] * w[j]
    return sig, coef, status
