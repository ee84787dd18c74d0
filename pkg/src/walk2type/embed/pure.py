"""Pure NumPy training kernels: the fallback when the compiled extension is
unavailable.  Same update order, learning-rate schedule, and negative-sample
stream as the compiled kernel (see _sgns.pyx); roughly two orders of
magnitude slower.
"""

from __future__ import annotations

import math

import numpy as np

_MULT = 25214903917
_INC = 11
_MASK64 = (1 << 64) - 1
_MASK53 = (1 << 53) - 1
_INV53 = 1.0 / 9007199254740992.0

FAST = False


def _sigmoid(f: float) -> float:
    if f >= 0:
        return 1.0 / (1.0 + math.exp(-f))
    e = math.exp(f)
    return e / (1.0 + e)


def _softplus(x: float) -> float:
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def train_epoch_sg(
    inp: np.ndarray,
    out: np.ndarray,
    tokens: np.ndarray,
    bounds: np.ndarray,
    window: int,
    order_aware: bool,
    negatives: int,
    lr_initial: float,
    lr_final: float,
    processed0: int,
    total: int,
    cumulative: np.ndarray,
    state: int,
) -> tuple[int, int, float, int]:
    """One skip-gram epoch over a flat token buffer.

    Returns (rng state, processed token count, summed loss, pair groups).
    """
    processed = processed0
    loss_sum = 0.0
    groups = 0
    work = np.zeros(inp.shape[1], dtype=np.float64)
    n_sent = len(bounds) - 1
    for s in range(n_sent):
        lo = int(bounds[s])
        hi = int(bounds[s + 1])
        sent = tokens[lo:hi].tolist()
        n = hi - lo
        alpha = lr_initial - (lr_initial - lr_final) * (processed / total)
        if alpha < lr_final:
            alpha = lr_final
        for i in range(n):
            center = sent[i]
            u = inp[center]
            for r in range(-window, window + 1):
                if r == 0:
                    continue
                j = i + r
                if j < 0 or j >= n:
                    continue
                ctx = sent[j]
                m = 0 if not order_aware else (r + window if r < 0 else r + window - 1)
                om = out[m]
                work[:] = 0.0
                for k in range(negatives + 1):
                    if k == 0:
                        target, label = ctx, 1.0
                    else:
                        state = (state * _MULT + _INC) & _MASK64
                        u01 = ((state >> 11) & _MASK53) * _INV53
                        target = int(np.searchsorted(cumulative, u01, side="right"))
                        if target == ctx:
                            continue
                        label = 0.0
                    v = om[target]
                    f = float(np.dot(u, v))
                    loss_sum += _softplus(-f) if label == 1.0 else _softplus(f)
                    g = (label - _sigmoid(f)) * alpha
                    work += g * v
                    v += g * u
                u += work
                groups += 1
        processed += n
    return state, processed, loss_sum, groups


def train_epoch_cbow(
    inp: np.ndarray,
    out: np.ndarray,
    tokens: np.ndarray,
    bounds: np.ndarray,
    window: int,
    order_aware: bool,
    negatives: int,
    lr_initial: float,
    lr_final: float,
    processed0: int,
    total: int,
    cumulative: np.ndarray,
    state: int,
) -> tuple[int, int, float, int]:
    """One CBOW epoch: mean of context input vectors predicts the center.

    The context-vector update applies the exact 1/n mean factor, so analytic
    gradients match finite differences (word2vec's C code skips the factor).
    """
    processed = processed0
    loss_sum = 0.0
    groups = 0
    om = out[0]
    n_sent = len(bounds) - 1
    for s in range(n_sent):
        lo = int(bounds[s])
        hi = int(bounds[s + 1])
        sent = tokens[lo:hi].tolist()
        n = hi - lo
        alpha = lr_initial - (lr_initial - lr_final) * (processed / total)
        if alpha < lr_final:
            alpha = lr_final
        for i in range(n):
            ctxs = [sent[j] for j in range(max(0, i - window), min(n, i + window + 1)) if j != i]
            if not ctxs:
                continue
            center = sent[i]
            l1 = inp[ctxs].mean(axis=0)
            work = np.zeros_like(l1)
            for k in range(negatives + 1):
                if k == 0:
                    target, label = center, 1.0
                else:
                    state = (state * _MULT + _INC) & _MASK64
                    u01 = ((state >> 11) & _MASK53) * _INV53
                    target = int(np.searchsorted(cumulative, u01, side="right"))
                    if target == center:
                        continue
                    label = 0.0
                v = om[target]
                f = float(np.dot(l1, v))
                loss_sum += _softplus(-f) if label == 1.0 else _softplus(f)
                g = (label - _sigmoid(f)) * alpha
                work += g * v
                v += g * l1
            scaled = work / len(ctxs)
            for c in ctxs:
                inp[c] += scaled
            groups += 1
        processed += n
    return state, processed, loss_sum, groups
