# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, nonecheck=False
"""Compiled skip-gram / CBOW negative-sampling kernels.

Update order, learning-rate schedule, and the negative-sample RNG stream are
identical to the NumPy fallback in pure.py; only floating-point reduction
order differs (sequential dot products here, BLAS there).
"""

from libc.math cimport exp, log1p

import numpy as np

ctypedef unsigned long long u64

FAST = True

cdef double _INV53 = 1.0 / 9007199254740992.0


cdef inline double _uniform(u64 *state) nogil:
    state[0] = state[0] * <u64>25214903917ULL + <u64>11ULL
    return <double>((state[0] >> 11) & <u64>0x1FFFFFFFFFFFFFULL) * _INV53


cdef inline Py_ssize_t _draw(const double[::1] cum, u64 *state) nogil:
    # first index with cum[i] > u, matching np.searchsorted(side="right")
    cdef double u = _uniform(state)
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = cum.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline double _sigmoid(double f) nogil:
    cdef double e
    if f >= 0:
        return 1.0 / (1.0 + exp(-f))
    e = exp(f)
    return e / (1.0 + e)


cdef inline double _softplus(double x) nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def train_epoch_sg(double[:, ::1] inp, double[:, :, ::1] out,
                   int[::1] tokens, long long[::1] bounds,
                   int window, bint order_aware, int negatives,
                   double lr_initial, double lr_final,
                   long long processed0, long long total,
                   double[::1] cumulative, u64 state):
    """One skip-gram epoch; returns (rng state, processed, loss sum, pair groups)."""
    cdef long long processed = processed0
    cdef double loss_sum = 0.0
    cdef long long groups = 0
    cdef Py_ssize_t n_sent = bounds.shape[0] - 1
    cdef Py_ssize_t dim = inp.shape[1]
    cdef double[::1] work = np.zeros(dim, dtype=np.float64)
    cdef Py_ssize_t s, i, j, c
    cdef int r, k
    cdef long long lo_b, hi_b, n
    cdef int center, ctx, target, m
    cdef double alpha, f, g, label

    with nogil:
        for s in range(n_sent):
            lo_b = bounds[s]
            hi_b = bounds[s + 1]
            n = hi_b - lo_b
            alpha = lr_initial - (lr_initial - lr_final) * (<double>processed / <double>total)
            if alpha < lr_final:
                alpha = lr_final
            for i in range(n):
                center = tokens[lo_b + i]
                for r in range(-window, window + 1):
                    if r == 0:
                        continue
                    j = i + r
                    if j < 0 or j >= n:
                        continue
                    ctx = tokens[lo_b + j]
                    if order_aware:
                        m = r + window if r < 0 else r + window - 1
                    else:
                        m = 0
                    for c in range(dim):
                        work[c] = 0.0
                    for k in range(negatives + 1):
                        if k == 0:
                            target = ctx
                            label = 1.0
                        else:
                            target = <int>_draw(cumulative, &state)
                            if target == ctx:
                                continue
                            label = 0.0
                        f = 0.0
                        for c in range(dim):
                            f += inp[center, c] * out[m, target, c]
                        if label == 1.0:
                            loss_sum += _softplus(-f)
                        else:
                            loss_sum += _softplus(f)
                        g = (label - _sigmoid(f)) * alpha
                        for c in range(dim):
                            work[c] += g * out[m, target, c]
                            out[m, target, c] += g * inp[center, c]
                    for c in range(dim):
                        inp[center, c] += work[c]
                    groups += 1
            processed += n
    return state, processed, loss_sum, groups


def train_epoch_cbow(double[:, ::1] inp, double[:, :, ::1] out,
                     int[::1] tokens, long long[::1] bounds,
                     int window, bint order_aware, int negatives,
                     double lr_initial, double lr_final,
                     long long processed0, long long total,
                     double[::1] cumulative, u64 state):
    """One CBOW epoch (mean context predicts center, exact 1/n backward factor)."""
    cdef long long processed = processed0
    cdef double loss_sum = 0.0
    cdef long long groups = 0
    cdef Py_ssize_t n_sent = bounds.shape[0] - 1
    cdef Py_ssize_t dim = inp.shape[1]
    cdef double[::1] work = np.zeros(dim, dtype=np.float64)
    cdef double[::1] l1 = np.zeros(dim, dtype=np.float64)
    cdef int[::1] ctxs = np.zeros(2 * window if window > 0 else 1, dtype=np.int32)
    cdef Py_ssize_t s, i, j, c, t, jlo, jhi
    cdef int k, n_ctx
    cdef long long lo_b, hi_b, n
    cdef int center, target
    cdef double alpha, f, g, label, inv

    with nogil:
        for s in range(n_sent):
            lo_b = bounds[s]
            hi_b = bounds[s + 1]
            n = hi_b - lo_b
            alpha = lr_initial - (lr_initial - lr_final) * (<double>processed / <double>total)
            if alpha < lr_final:
                alpha = lr_final
            for i in range(n):
                jlo = i - window
                if jlo < 0:
                    jlo = 0
                jhi = i + window + 1
                if jhi > n:
                    jhi = n
                n_ctx = 0
                for j in range(jlo, jhi):
                    if j != i:
                        ctxs[n_ctx] = tokens[lo_b + j]
                        n_ctx += 1
                if n_ctx == 0:
                    continue
                center = tokens[lo_b + i]
                inv = 1.0 / n_ctx
                for c in range(dim):
                    l1[c] = 0.0
                for t in range(n_ctx):
                    for c in range(dim):
                        l1[c] += inp[ctxs[t], c]
                for c in range(dim):
                    l1[c] *= inv
                    work[c] = 0.0
                for k in range(negatives + 1):
                    if k == 0:
                        target = center
                        label = 1.0
                    else:
                        target = <int>_draw(cumulative, &state)
                        if target == center:
                            continue
                        label = 0.0
                    f = 0.0
                    for c in range(dim):
                        f += l1[c] * out[0, target, c]
                    if label == 1.0:
                        loss_sum += _softplus(-f)
                    else:
                        loss_sum += _softplus(f)
                    g = (label - _sigmoid(f)) * alpha
                    for c in range(dim):
                        work[c] += g * out[0, target, c]
                        out[0, target, c] += g * l1[c]
                for c in range(dim):
                    work[c] *= inv
                for t in range(n_ctx):
                    for c in range(dim):
                        inp[ctxs[t], c] += work[c]
                groups += 1
            processed += n
    return state, processed, loss_sum, groups
