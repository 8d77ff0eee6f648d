# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


def hamilton_forward(logdens, trans, init):
    cdef const double[:, ::1] ld = np.ascontiguousarray(logdens, dtype=np.float64)
    cdef const double[:, ::1] P = np.ascontiguousarray(trans, dtype=np.float64)
    cdef const double[::1] p0 = np.ascontiguousarray(init, dtype=np.float64)
    cdef Py_ssize_t T = ld.shape[0], k = ld.shape[1]
    filtered_a = np.empty((T, k))
    predicted_a = np.empty((T, k))
    cdef double[:, ::1] filt = filtered_a
    cdef double[:, ::1] pred = predicted_a
    cdef double[::1] w = np.empty(k)
    cdef Py_ssize_t t, i, j
    cdef double lmax, c, s, loglik = 0.0
    for t in range(T):
        if t == 0:
            for j in range(k):
                pred[0, j] = p0[j]
        else:
            for j in range(k):
                s = 0.0
                for i in range(k):
                    s += filt[t - 1, i] * P[i, j]
                pred[t, j] = s
        lmax = -INFINITY
        for j in range(k):
            if ld[t, j] > lmax:
                lmax = ld[t, j]
        if not (lmax > -INFINITY and lmax < INFINITY):
            return filtered_a, predicted_a, loglik, t
        c = 0.0
        for j in range(k):
            w[j] = pred[t, j] * exp(ld[t, j] - lmax)
            c += w[j]
        if not (c > 0.0):
            return filtered_a, predicted_a, loglik, t
        for j in range(k):
            filt[t, j] = w[j] / c
        loglik += log(c) + lmax
    return filtered_a, predicted_a, loglik, -1


def kim_smoother(filtered, predicted, trans):
    cdef const double[:, ::1] filt = np.ascontiguousarray(filtered, dtype=np.float64)
    cdef const double[:, ::1] pred = np.ascontiguousarray(predicted, dtype=np.float64)
    cdef const double[:, ::1] P = np.ascontiguousarray(trans, dtype=np.float64)
    cdef Py_ssize_t T = filt.shape[0], k = filt.shape[1]
    smoothed_a = np.empty((T, k))
    joint_a = np.zeros((k, k))
    cdef double[:, ::1] sm = smoothed_a
    cdef double[:, ::1] joint = joint_a
    cdef double[::1] r = np.empty(k)
    cdef Py_ssize_t t, i, j
    cdef double s
    for j in range(k):
        sm[T - 1, j] = filt[T - 1, j]
    for t in range(T - 2, -1, -1):
        for j in range(k):
            r[j] = sm[t + 1, j] / pred[t + 1, j] if pred[t + 1, j] > 0.0 else 0.0
        for i in range(k):
            s = 0.0
            for j in range(k):
                s += P[i, j] * r[j]
                joint[i, j] += filt[t, i] * P[i, j] * r[j]
            sm[t, i] = filt[t, i] * s
    return smoothed_a, joint_a


def ar_forecast(history, phi, innovations):
    cdef const double[::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef const double[::1] e = np.ascontiguousarray(innovations, dtype=np.float64)
    cdef Py_ssize_t L = ph.shape[0], H = e.shape[0]
    buf_a = np.empty(L + H)
    buf_a[:L] = history
    cdef double[::1] buf = buf_a
    cdef Py_ssize_t h, j, idx
    cdef double s
    for h in range(H):
        idx = L + h
        s = 0.0
        for j in range(L):
            s += ph[L - 1 - j] * buf[h + j]
        buf[idx] = s + e[h]
    return buf_a[L:].copy()


def markov_states(cum_init, cum_trans, uniforms):
    cdef const double[::1] ci = np.ascontiguousarray(cum_init, dtype=np.float64)
    cdef const double[:, ::1] ct = np.ascontiguousarray(cum_trans, dtype=np.float64)
    cdef const double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t k = ci.shape[0], H = u.shape[0] - 1
    out_a = np.empty(H, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_a
    cdef Py_ssize_t s = 0, h, j
    while s < k - 1 and ci[s] <= u[0]:
        s += 1
    for h in range(H):
        j = 0
        while j < k - 1 and ct[s, j] <= u[h + 1]:
            j += 1
        s = j
        out[h] = s
    return out_a
