# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for threshold search, ranking metrics and block resampling.

Every function takes arrays already sorted by the caller; see ``_fallback`` for
the NumPy twin with the same signatures.
"""
import numpy as np

cimport numpy as cnp
from libc.stdint cimport int8_t, int64_t

cnp.import_array()


def sweep_threshold(const double[::1] s, const int8_t[::1] y, double c_fn, double c_fp):
    """Minimise ``c_fn*FN + c_fp*FP`` over tie-groups of descending scores ``s``.

    Returns ``(end, loss, tp, fp)`` where ``end`` is the exclusive end index of
    the flagged prefix (0 means flag nothing). Ties in loss go to the longest
    prefix, i.e. the lowest threshold.
    """
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i
    cdef int64_t pos = 0, tp = 0, fp = 0
    for i in range(n):
        pos += y[i]
    cdef double best = c_fn * <double>pos + c_fp * <double>0
    cdef Py_ssize_t best_end = 0
    cdef int64_t best_tp = 0, best_fp = 0
    cdef double loss
    for i in range(n):
        if y[i]:
            tp += 1
        else:
            fp += 1
        if i + 1 < n and s[i + 1] == s[i]:
            continue
        loss = c_fn * <double>(pos - tp) + c_fp * <double>fp
        if loss <= best:
            best = loss
            best_end = i + 1
            best_tp = tp
            best_fp = fp
    return best_end, best, best_tp, best_fp


def roc_auc_sorted(const double[::1] s, const int8_t[::1] y):
    """Mann-Whitney AUC from ascending scores ``s``; ties count one half."""
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i = 0, j
    cdef int64_t neg_below = 0, g_pos, g_neg, n_pos = 0
    cdef double wins = 0.0
    while i < n:
        j = i
        g_pos = 0
        g_neg = 0
        while j < n and s[j] == s[i]:
            if y[j]:
                g_pos += 1
            else:
                g_neg += 1
            j += 1
        wins += <double>g_pos * (<double>neg_below + 0.5 * <double>g_neg)
        neg_below += g_neg
        n_pos += g_pos
        i = j
    return wins / (<double>n_pos * <double>neg_below)


def average_precision_sorted(const double[::1] s, const int8_t[::1] y):
    """Average precision from descending scores ``s``, one step per tie-group."""
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i
    cdef int64_t pos = 0, tp = 0, fp = 0, tp_prev = 0
    cdef double ap = 0.0
    for i in range(n):
        pos += y[i]
    for i in range(n):
        if y[i]:
            tp += 1
        else:
            fp += 1
        if i + 1 < n and s[i + 1] == s[i]:
            continue
        if tp > tp_prev:
            ap += (<double>(tp - tp_prev) / <double>pos) * (<double>tp / <double>(tp + fp))
            tp_prev = tp
    return ap


def block_means(const double[::1] x, const int64_t[:, ::1] starts, Py_ssize_t block_len):
    """Mean of each replicate built from concatenated blocks, truncated to len(x)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_rep = starts.shape[0]
    cdef Py_ssize_t n_blk = starts.shape[1]
    cdef Py_ssize_t r, b, k, taken, take, st
    cdef double acc
    out = np.empty(n_rep, dtype=np.float64)
    cdef double[::1] o = out
    for r in range(n_rep):
        acc = 0.0
        taken = 0
        for b in range(n_blk):
            take = block_len
            if taken + take > n:
                take = n - taken
            st = starts[r, b]
            for k in range(take):
                acc += x[st + k]
            taken += take
        o[r] = acc / <double>n
    return out
