"""Corpus vocabulary: token interning and frequency counting."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import EmptyCorpus


@dataclass
class Vocabulary:
    tokens: list[str]
    counts: np.ndarray  # int64, aligned with tokens
    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index


def build_vocab(sentences: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Count tokens and assign dense ids by (count desc, token lexicographic).

    Tokens below min_count are excluded entirely.
    """
    freq: Counter[str] = Counter()
    any_sentence = False
    for sent in sentences:
        any_sentence = True
        freq.update(sent)
    if not any_sentence:
        raise EmptyCorpus("corpus contains no sentences")
    items = sorted(
        ((tok, c) for tok, c in freq.items() if c >= min_count),
        key=lambda tc: (-tc[1], tc[0]),
    )
    if not items:
        raise EmptyCorpus(f"no token reaches min_count={min_count}")
    tokens = [tok for tok, _ in items]
    counts = np.array([c for _, c in items], dtype=np.int64)
    return Vocabulary(tokens, counts, {tok: i for i, tok in enumerate(tokens)})


def encode_sentences(
    sentences: Iterable[Sequence[str]], vocab: Vocabulary
) -> list[np.ndarray]:
    """Map sentences to id arrays, dropping out-of-vocabulary tokens."""
    index = vocab.index
    out = []
    for sent in sentences:
        ids = [index[t] for t in sent if t in index]
        out.append(np.asarray(ids, dtype=np.int32))
    return out
