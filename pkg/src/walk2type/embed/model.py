"""Skip-gram / CBOW training driver with backend selection.

The hot loop lives in the compiled extension (_sgns) when it imported
successfully, otherwise in the NumPy fallback (pure).  Both expose the same
epoch functions, so the driver is backend-agnostic.  In order-aware mode the
model keeps one output matrix per signed context offset; classic mode keeps a
single shared one.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import (
    DimMismatch,
    EmptyCorpus,
    FormatError,
    NonFiniteUpdate,
    UnsupportedConfig,
)
from . import pure
from .sampling import NoiseDistribution
from .vocab import Vocabulary, build_vocab, encode_sentences

try:
    from . import _sgns as _fast
except ImportError:  # extension not built on this platform
    _fast = None

logger = logging.getLogger(__name__)

ARCHITECTURES = ("sg", "cbow")
_MASK64 = (1 << 64) - 1


def fast_backend_available() -> bool:
    return _fast is not None


def resolve_backend(name: str = "auto"):
    if name == "auto":
        return _fast if _fast is not None else pure
    if name == "fast":
        if _fast is None:
            raise UnsupportedConfig("compiled training kernel is not available")
        return _fast
    if name == "numpy":
        return pure
    raise ValueError(f"unknown backend {name!r} (expected auto, fast, or numpy)")


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 200
    epochs: int = 5
    window: int = 5
    negatives: int = 5
    lr_initial: float = 0.025
    lr_final: float = 0.0001
    order_aware: bool = False
    architecture: str = "sg"
    seed: int = 1
    min_count: int = 1
    subsample: float = 0.0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if self.architecture == "cbow" and self.order_aware:
            raise UnsupportedConfig("order-aware training is defined for skip-gram only")
        if self.dim < 1 or self.window < 1 or self.epochs < 1 or self.negatives < 0:
            raise ValueError("dim, window, epochs must be >= 1 and negatives >= 0")

    @property
    def n_output_matrices(self) -> int:
        return 2 * self.window if self.order_aware else 1


def offset_to_matrix(r: int, window: int) -> int:
    """Map a signed context offset to its output-matrix slot (0..2*window-1)."""
    if r == 0 or abs(r) > window:
        raise ValueError(f"offset {r} outside the +-{window} window")
    return r + window if r < 0 else r + window - 1


@dataclass
class EmbeddingMatrix:
    vocab: Vocabulary
    input_vectors: np.ndarray  # (V, dim) float64
    output_vectors: np.ndarray | None  # (n_matrices, V, dim); None after load
    config: TrainConfig
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.input_vectors.shape[1])

    def vector(self, token: str) -> np.ndarray:
        return self.input_vectors[self.vocab.index[token]]

    def to_store(self) -> dict[str, np.ndarray]:
        return {tok: self.input_vectors[i] for i, tok in enumerate(self.vocab.tokens)}


def init_matrices(vocab_size: int, config: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Input vectors uniform in [-0.5/dim, 0.5/dim], output matrices zero."""
    ss = np.random.SeedSequence([config.seed & _MASK64, 0x57A17])
    rng = np.random.Generator(np.random.PCG64(ss))
    inp = (rng.random((vocab_size, config.dim)) - 0.5) / config.dim
    out = np.zeros((config.n_output_matrices, vocab_size, config.dim), dtype=np.float64)
    return inp, out


def _flatten(encoded: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    bounds = np.zeros(len(encoded) + 1, dtype=np.int64)
    for i, s in enumerate(encoded):
        bounds[i + 1] = bounds[i] + len(s)
    tokens = (
        np.concatenate(encoded).astype(np.int32)
        if len(encoded)
        else np.zeros(0, np.int32)
    )
    return tokens, bounds


def _subsampled(
    encoded: Sequence[np.ndarray], vocab: Vocabulary, t: float, seed: int, epoch: int
) -> list[np.ndarray]:
    """Standard frequency subsampling, applied per epoch outside the kernels."""
    total = int(vocab.counts.sum())
    counts = vocab.counts.astype(np.float64)
    keep = (np.sqrt(counts / (t * total)) + 1.0) * (t * total) / counts
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed & _MASK64, 0x5B5, epoch]))
    )
    out = []
    for sent in encoded:
        if len(sent) == 0:
            out.append(sent)
            continue
        mask = rng.random(len(sent)) < keep[sent]
        out.append(sent[mask])
    return out


def _chunk_bounds(bounds: np.ndarray, n_chunks: int) -> list[tuple[int, int]]:
    """Split the sentence range into contiguous chunks of roughly equal tokens."""
    n_sent = len(bounds) - 1
    total = int(bounds[-1])
    edges = [0]
    for k in range(1, n_chunks):
        target = total * k // n_chunks
        edges.append(int(np.searchsorted(bounds, target, side="left")))
    edges.append(n_sent)
    return [(edges[i], edges[i + 1]) for i in range(n_chunks) if edges[i] < edges[i + 1]]


def train(
    sentences: Iterable[Sequence[str]],
    config: TrainConfig,
    threads: int = 1,
    backend: str = "auto",
    epoch_callback: Callable[[int, float], None] | None = None,
) -> EmbeddingMatrix:
    """Train embeddings over a corpus of token sentences.

    Pairs come from a fixed (never randomly shrunk) context window, so classic
    and order-aware runs consume identical positive pairs.  The learning rate
    decays linearly from lr_initial to lr_final over all token updates.
    Single-threaded runs are bit-reproducible for a fixed seed and backend;
    with threads > 1 parameter updates follow the hogwild contract (races
    tolerated, convergence statistical).
    """
    kernels = resolve_backend(backend)
    sentences = [list(s) for s in sentences]
    vocab = build_vocab(sentences, config.min_count)
    encoded = encode_sentences(sentences, vocab)
    noise = NoiseDistribution(vocab.counts)
    inp, out = init_matrices(len(vocab), config)

    if config.subsample > 0:
        streams = [
            _flatten(_subsampled(encoded, vocab, config.subsample, config.seed, e))
            for e in range(config.epochs)
        ]
    else:
        streams = [_flatten(encoded)] * config.epochs
    total = int(sum(int(b[-1]) for _, b in streams))
    if total == 0:
        raise EmptyCorpus("no trainable tokens after encoding")

    kernel = kernels.train_epoch_sg if config.architecture == "sg" else kernels.train_epoch_cbow
    if threads > 1 and kernels is pure:
        logger.warning("NumPy backend ignores threads=%d (GIL-bound); running single-threaded", threads)
        threads = 1

    state = config.seed & _MASK64
    processed = 0
    losses: list[float] = []
    for epoch in range(config.epochs):
        tokens, bounds = streams[epoch]
        epoch_tokens = int(bounds[-1])
        if threads <= 1:
            state, processed, loss_sum, groups = kernel(
                inp, out, tokens, bounds, config.window, config.order_aware,
                config.negatives, config.lr_initial, config.lr_final,
                processed, total, noise.cumulative, state,
            )
        else:
            loss_sum, groups = _run_threaded(
                kernel, inp, out, tokens, bounds, config, noise,
                processed, total, threads, epoch,
            )
            processed += epoch_tokens
        if not (np.isfinite(inp).all() and np.isfinite(out).all()):
            raise NonFiniteUpdate(f"non-finite parameter after epoch {epoch + 1}")
        avg = loss_sum / groups if groups else 0.0
        losses.append(avg)
        logger.debug("epoch %d/%d: avg pair loss %.6f", epoch + 1, config.epochs, avg)
        if epoch_callback is not None:
            epoch_callback(epoch + 1, avg)
    return EmbeddingMatrix(vocab, inp, out, config, losses)


def _run_threaded(kernel, inp, out, tokens, bounds, config, noise, processed, total, threads, epoch):
    chunks = _chunk_bounds(bounds, threads)
    results: list[tuple[float, int]] = [(0.0, 0)] * len(chunks)

    def work(w: int, lo: int, hi: int, processed0: int):
        sub_bounds = bounds[lo : hi + 1]
        w_state = (config.seed + 0x9E3779B97F4A7C15 * (w + 1) + 0x10001 * epoch) & _MASK64
        _, _, loss_sum, groups = kernel(
            inp, out, tokens, sub_bounds, config.window, config.order_aware,
            config.negatives, config.lr_initial, config.lr_final,
            processed0, total, noise.cumulative, w_state,
        )
        results[w] = (loss_sum, groups)

    ts = []
    offset = processed
    for w, (lo, hi) in enumerate(chunks):
        ts.append(threading.Thread(target=work, args=(w, lo, hi, offset)))
        offset += int(bounds[hi] - bounds[lo])
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    return sum(r[0] for r in results), sum(r[1] for r in results)


def training_pairs(
    sentences: Iterable[Sequence[str]], window: int, order_aware: bool
) -> Counter:
    """The exact (center, context[, offset]) multiset a trainer consumes.

    Classic mode logs (center, context) with no positional information;
    order-aware mode logs (center, context, offset).  This is the
    instrumented pair logger used to verify order sensitivity.
    """
    pairs: Counter = Counter()
    for sent in sentences:
        n = len(sent)
        for i in range(n):
            for r in range(-window, window + 1):
                if r == 0:
                    continue
                j = i + r
                if 0 <= j < n:
                    if order_aware:
                        pairs[(sent[i], sent[j], r)] += 1
                    else:
                        pairs[(sent[i], sent[j])] += 1
    return pairs


def save_embeddings(matrix: EmbeddingMatrix, path: str) -> None:
    """Text format: header `<count> <dim>`, then one `<token> <f1> ... <fdim>`
    line per input vector.  A JSON sidecar (<path>.json) stores the config."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(matrix.vocab)} {matrix.dim}\n")
        for i, tok in enumerate(matrix.vocab.tokens):
            row = " ".join(str(x) for x in matrix.input_vectors[i].tolist())
            f.write(f"{tok} {row}\n")
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump(asdict(matrix.config), f, sort_keys=True, indent=2)
        f.write("\n")


def load_embeddings(path: str) -> EmbeddingMatrix:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}: expected header '<count> <dim>'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError(f"{path}: non-integer header fields") from None
        tokens: list[str] = []
        vectors = np.empty((count, dim), dtype=np.float64)
        n = 0
        for line in f:
            if not line.strip():
                continue
            if n >= count:
                raise FormatError(f"{path}: more rows than the header's {count}")
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DimMismatch(
                    f"{path}: row {n + 1} has {len(parts) - 1} values, expected {dim}",
                    line_no=n + 2,
                )
            tokens.append(parts[0])
            vectors[n] = [float(x) for x in parts[1:]]
            n += 1
        if n != count:
            raise FormatError(f"{path}: header promised {count} rows, found {n}")
    try:
        with open(path + ".json", "r", encoding="utf-8") as f:
            config = TrainConfig(**json.load(f))
    except FileNotFoundError:
        config = TrainConfig(dim=dim)
    vocab = Vocabulary(tokens, np.ones(count, dtype=np.int64), {t: i for i, t in enumerate(tokens)})
    return EmbeddingMatrix(vocab, vectors, None, config)
