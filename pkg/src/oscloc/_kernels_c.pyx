# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-frame hot loops.

Mirrors _kernels_py exactly (same branch order, same tie-breaking, same
floating-point operation order); tests assert the two backends agree."""

import numpy as np


def rule_labels(double[:, ::1] scores, double tau, double delta):
    cdef Py_ssize_t T = scores.shape[0]
    out_arr = np.empty(T, dtype=np.int8)
    cdef signed char[::1] out = out_arr
    cdef Py_ssize_t t
    cdef double a, b, c
    for t in range(T):
        a = scores[t, 0]
        b = scores[t, 1]
        c = scores[t, 2]
        if (a + b) + c < tau:
            out[t] = 0
        elif a - b > delta and a - c > delta:
            out[t] = 1
        elif b - a > delta and b - c > delta:
            out[t] = 2
        elif c - a > delta and c - b > delta:
            out[t] = 3
        else:
            out[t] = 4
    return out_arr


def causal_order(signed char[::1] labels):
    cdef Py_ssize_t T = labels.shape[0]
    out_arr = np.empty(T, dtype=np.int8)
    cdef signed char[::1] out = out_arr
    cdef Py_ssize_t t, i, m = 0
    for t in range(T):
        out[t] = labels[t]
        if 1 <= labels[t] <= 3:
            m += 1
    if m == 0:
        return out_arr

    pos_arr = np.empty(m, dtype=np.int64)
    stage_arr = np.empty(m, dtype=np.int64)
    cdef long long[::1] pos = pos_arr
    cdef long long[::1] stage = stage_arr
    i = 0
    for t in range(T):
        if 1 <= labels[t] <= 3:
            pos[i] = t
            stage[i] = labels[t] - 1
            i += 1

    dp_arr = np.zeros((m, 3), dtype=np.int64)
    cdef long long[:, ::1] dp = dp_arr
    cdef long long best
    cdef int g, h, arg
    for g in range(3):
        dp[0, g] = 1 if stage[0] == g else 0
    for i in range(1, m):
        best = dp[i - 1, 0]
        for g in range(3):
            if dp[i - 1, g] > best:
                best = dp[i - 1, g]
            dp[i, g] = best + (1 if stage[i] == g else 0)

    best = dp[m - 1, 0]
    arg = 0
    for g in range(1, 3):
        if dp[m - 1, g] > best:
            best = dp[m - 1, g]
            arg = g
    g = arg
    for i in range(m - 1, -1, -1):
        if stage[i] != g:
            out[pos[i]] = 4
        if i > 0:
            best = dp[i - 1, 0]
            arg = 0
            for h in range(1, g + 1):
                if dp[i - 1, h] > best:
                    best = dp[i - 1, h]
                    arg = h
            g = arg
    return out_arr


def ordered_decode_path(double[:, ::1] scores):
    cdef Py_ssize_t T = scores.shape[0]
    cdef Py_ssize_t t
    out_arr = np.zeros(T, dtype=np.int8)
    cdef signed char[::1] out = out_arr
    dp_arr = np.empty((T, 4), dtype=np.float64)
    cdef double[:, ::1] dp = dp_arr
    cdef double best, e
    cdef int g, h, arg

    for g in range(4):
        e = scores[0, 0]
        if g > 0 and scores[0, g] > e:
            e = scores[0, g]
        dp[0, g] = e
    for t in range(1, T):
        best = dp[t - 1, 0]
        for g in range(4):
            if dp[t - 1, g] > best:
                best = dp[t - 1, g]
            e = scores[t, 0]
            if g > 0 and scores[t, g] > e:
                e = scores[t, g]
            dp[t, g] = best + e

    best = dp[T - 1, 0]
    arg = 0
    for g in range(1, 4):
        if dp[T - 1, g] > best:
            best = dp[T - 1, g]
            arg = g
    g = arg
    for t in range(T - 1, -1, -1):
        if g > 0 and scores[t, g] > scores[t, 0]:
            out[t] = <signed char> g
        if t > 0:
            best = dp[t - 1, 0]
            arg = 0
            for h in range(1, g + 1):
                if dp[t - 1, h] >= best:
                    best = dp[t - 1, h]
                    arg = h
            g = arg
    return out_arr
