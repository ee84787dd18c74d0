"""Skip-gram embedding training over walk corpora (compiled core + NumPy fallback)."""

from .model import (
    ARCHITECTURES,
    EmbeddingMatrix,
    TrainConfig,
    fast_backend_available,
    init_matrices,
    load_embeddings,
    offset_to_matrix,
    resolve_backend,
    save_embeddings,
    train,
    training_pairs,
)
from .objective import PairSample, batch_gradients, batch_loss, sigmoid, softplus
from .sampling import Lcg, NoiseDistribution
from .vocab import Vocabulary, build_vocab, encode_sentences

__all__ = [
    "ARCHITECTURES",
    "EmbeddingMatrix",
    "TrainConfig",
    "Vocabulary",
    "Lcg",
    "NoiseDistribution",
    "PairSample",
    "batch_gradients",
    "batch_loss",
    "build_vocab",
    "encode_sentences",
    "fast_backend_available",
    "init_matrices",
    "load_embeddings",
    "offset_to_matrix",
    "resolve_backend",
    "save_embeddings",
    "sigmoid",
    "softplus",
    "train",
    "training_pairs",
]
