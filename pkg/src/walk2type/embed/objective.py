"""Exact negative-sampling objective on frozen micro-batches.

This is the reference form of what the training kernels optimize: given a
fixed set of (center, output-matrix, context, negatives) samples, compute the
summed loss and its analytic gradients.  Used by the gradient-check suite and
by unit tests that pin kernel updates to the analytic step.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np


class PairSample(NamedTuple):
    center: int
    matrix: int  # output-matrix index: 0 in classic mode, offset slot when order-aware
    context: int
    negatives: tuple[int, ...]


def sigmoid(f: float) -> float:
    if f >= 0:
        return 1.0 / (1.0 + math.exp(-f))
    e = math.exp(f)
    return e / (1.0 + e)


def softplus(x: float) -> float:
    """log(1 + e^x), overflow-safe."""
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def batch_loss(inp: np.ndarray, out: np.ndarray, batch: Sequence[PairSample]) -> float:
    """Sum over samples of -log s(u.v+) - sum_neg log s(-u.v-)."""
    total = 0.0
    for s in batch:
        u = inp[s.center]
        total += softplus(-float(np.dot(u, out[s.matrix, s.context])))
        for n in s.negatives:
            total += softplus(float(np.dot(u, out[s.matrix, n])))
    return total


def batch_gradients(
    inp: np.ndarray, out: np.ndarray, batch: Sequence[PairSample]
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradients of batch_loss with respect to both matrices."""
    g_inp = np.zeros_like(inp)
    g_out = np.zeros_like(out)
    for s in batch:
        u = inp[s.center]
        for target, label in [(s.context, 1.0)] + [(n, 0.0) for n in s.negatives]:
            v = out[s.matrix, target]
            err = sigmoid(float(np.dot(u, v))) - label
            g_inp[s.center] += err * v
            g_out[s.matrix, target] += err * u
    return g_inp, g_out
