"""Negative-sampling noise distribution and the integer RNG shared by both
training kernels.

The LCG below is reproduced bit-for-bit inside the compiled kernel, so a
negative-sample stream depends only on the seed, never on the backend.
"""

from __future__ import annotations

import numpy as np

_MULT = 25214903917
_INC = 11
_MASK64 = (1 << 64) - 1
_MASK53 = (1 << 53) - 1
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


class Lcg:
    """64-bit linear congruential generator (word2vec lineage constants)."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_uniform(self) -> float:
        """Uniform float64 in [0, 1) from the high state bits."""
        self.state = (self.state * _MULT + _INC) & _MASK64
        return ((self.state >> 11) & _MASK53) * _INV53


class NoiseDistribution:
    """Unigram distribution raised to a power (default 0.75), renormalized.

    Sampling walks a precomputed cumulative table, so a draw costs one
    uniform plus a binary search.
    """

    def __init__(self, counts: np.ndarray, power: float = 0.75):
        counts = np.asarray(counts, dtype=np.float64)
        if counts.size == 0:
            raise ValueError("empty vocabulary")
        weights = counts**power
        self.cumulative = np.cumsum(weights / weights.sum())
        self.cumulative[-1] = 1.0  # guard against rounding shortfall

    def __len__(self) -> int:
        return len(self.cumulative)

    def probability(self, token_id: int) -> float:
        lo = self.cumulative[token_id - 1] if token_id > 0 else 0.0
        return float(self.cumulative[token_id] - lo)

    def sample(self, rng: Lcg) -> int:
        u = rng.next_uniform()
        return int(np.searchsorted(self.cumulative, u, side="right"))
