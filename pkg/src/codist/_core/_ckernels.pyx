# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``.

Same signatures, same order of operations, and the same caller-provided
draw arrays, so both backends consume randomness identically and pick
the same samples bitwise.  Exponential acceptance thresholds are
computed with numpy here too, keeping the accept/reject comparisons
bit-for-bit equal across backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def linear_pass(const cnp.int64_t[::1] comp_ranks, cnp.uint8_t[::1] taken,
                cnp.int64_t[::1] sel, count, k):
    cdef Py_ssize_t n = comp_ranks.shape[0]
    cdef Py_ssize_t i
    cdef cnp.int64_t c = count
    cdef cnp.int64_t kk = k
    for i in range(n):
        if c >= kk:
            break
        if i + 1 < comp_ranks[i] and taken[i] == 0:
            taken[i] = 1
            sel[c] = i
            c += 1
    return int(c)


def exp_pass(const double[::1] u_draws, double gamma, cnp.uint8_t[::1] taken,
             cnp.int64_t[::1] sel, count, k):
    cdef Py_ssize_t n = u_draws.shape[0]
    thresh_arr = np.exp(-gamma * np.arange(n, dtype=np.float64) / n)
    cdef double[::1] thresh = thresh_arr
    cdef Py_ssize_t i
    cdef cnp.int64_t c = count
    cdef cnp.int64_t kk = k
    for i in range(n):
        if c >= kk:
            break
        if u_draws[i] < thresh[i] and taken[i] == 0:
            taken[i] = 1
            sel[c] = i
            c += 1
    return int(c)


def tally_linear_pass(const cnp.int64_t[::1] comp_ranks, cnp.int64_t[::1] counts):
    cdef Py_ssize_t n = comp_ranks.shape[0]
    cdef Py_ssize_t i
    cdef cnp.int64_t acc = 0
    for i in range(n):
        if i + 1 < comp_ranks[i]:
            counts[i] += 1
            acc += 1
    return int(acc)


def tally_exp_pass(const double[::1] u_draws, double gamma, cnp.int64_t[::1] counts):
    cdef Py_ssize_t n = u_draws.shape[0]
    thresh_arr = np.exp(-gamma * np.arange(n, dtype=np.float64) / n)
    cdef double[::1] thresh = thresh_arr
    cdef Py_ssize_t i
    cdef cnp.int64_t acc = 0
    for i in range(n):
        if u_draws[i] < thresh[i]:
            counts[i] += 1
            acc += 1
    return int(acc)


def mf_score_subset(const double[::1] p, const double[:, ::1] item_factors,
                    const double[::1] item_bias, const cnp.int64_t[::1] items):
    cdef Py_ssize_t m = items.shape[0]
    cdef Py_ssize_t d = p.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t j, t
    cdef cnp.int64_t row
    cdef double s
    for j in range(m):
        row = items[j]
        s = 0.0
        for t in range(d):
            s += item_factors[row, t] * p[t]
        out[j] = s + item_bias[row]
    return out_arr


def mf_score_all(const double[::1] p, const double[:, ::1] item_factors,
                 const double[::1] item_bias):
    cdef Py_ssize_t n = item_factors.shape[0]
    cdef Py_ssize_t d = p.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t
    cdef double s
    for i in range(n):
        s = 0.0
        for t in range(d):
            s += item_factors[i, t] * p[t]
        out[i] = s + item_bias[i]
    return out_arr


def mf_user_step_sgd(double[::1] p, double[:, ::1] item_factors,
                     double[::1] item_bias, const cnp.int64_t[::1] items,
                     const double[::1] gz, double lr, double l2):
    cdef Py_ssize_t m = items.shape[0]
    cdef Py_ssize_t d = p.shape[0]
    g_user_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] g_user = g_user_arr
    cdef Py_ssize_t j, t
    cdef cnp.int64_t row
    cdef double g
    for j in range(m):
        row = items[j]
        g = gz[j]
        for t in range(d):
            g_user[t] += g * item_factors[row, t]
    # item rows and biases first, against the pre-update user vector
    for j in range(m):
        row = items[j]
        g = gz[j]
        for t in range(d):
            item_factors[row, t] -= lr * (g * p[t] + l2 * item_factors[row, t])
        item_bias[row] -= lr * (g + l2 * item_bias[row])
    for t in range(d):
        p[t] -= lr * (g_user[t] + l2 * p[t])


def mf_user_step_adagrad(double[::1] p, double[:, ::1] item_factors,
                         double[::1] item_bias, const cnp.int64_t[::1] items,
                         const double[::1] gz, double lr, double l2, double eps,
                         double[::1] acc_p, double[:, ::1] acc_q,
                         double[::1] acc_b):
    cdef Py_ssize_t m = items.shape[0]
    cdef Py_ssize_t d = p.shape[0]
    g_user_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] g_user = g_user_arr
    cdef Py_ssize_t j, t
    cdef cnp.int64_t row
    cdef double g, gr
    for j in range(m):
        row = items[j]
        g = gz[j]
        for t in range(d):
            g_user[t] += g * item_factors[row, t]
    for j in range(m):
        row = items[j]
        g = gz[j]
        for t in range(d):
            gr = g * p[t]
            acc_q[row, t] += gr * gr
            item_factors[row, t] -= lr * (gr + l2 * item_factors[row, t]) / sqrt(acc_q[row, t] + eps)
        acc_b[row] += g * g
        item_bias[row] -= lr * (g + l2 * item_bias[row]) / sqrt(acc_b[row] + eps)
    for t in range(d):
        acc_p[t] += g_user[t] * g_user[t]
        p[t] -= lr * (g_user[t] + l2 * p[t]) / sqrt(acc_p[t] + eps)
