"""Per-entity feature assembly.

Selected embedding variants (and optional description vectors) are fused by
plain concatenation or by PCA over the concatenated vectors, where the PCA
population is either the dataset entities (local) or every graph entity
(global).  The segment map records where each source part sits inside the
pre-PCA concatenated vector; weight-group reporting depends on it.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateInput, DimMismatch, FormatError

FUSION_MODES = ("concat", "lpca", "gpca")


@dataclass
class VectorTable:
    """Uniform iri -> dense vector store (embedding variants, descriptions)."""

    dim: int
    vectors: dict[str, np.ndarray]
    duplicates: int = 0

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, iri: str) -> np.ndarray | None:
        return self.vectors.get(iri)

    @classmethod
    def from_embeddings(cls, matrix) -> "VectorTable":
        return cls(matrix.dim, matrix.to_store())


DescriptionStore = VectorTable


def load_description_vectors(source: IO[str] | str) -> DescriptionStore:
    """Read TSV lines `iri \\t f1,f2,...,fd`; duplicate iri keeps the last row."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as f:
            return load_description_vectors(f)
    vectors: dict[str, np.ndarray] = {}
    dim = -1
    duplicates = 0
    for line_no, line in enumerate(source, start=1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2:
            raise FormatError(f"line {line_no}: expected `iri \\t values`")
        iri, values = parts
        try:
            vec = np.array([float(x) for x in values.split(",")], dtype=np.float64)
        except ValueError:
            raise FormatError(f"line {line_no}: non-numeric vector component") from None
        if not np.isfinite(vec).all():
            raise FormatError(f"line {line_no}: non-finite vector component")
        if dim < 0:
            dim = len(vec)
        elif len(vec) != dim:
            raise DimMismatch(
                f"line {line_no}: vector has {len(vec)} components, expected {dim}",
                line_no=line_no,
            )
        if iri in vectors:
            duplicates += 1
        vectors[iri] = vec
    return DescriptionStore(max(dim, 0), vectors, duplicates)


class Segment(NamedTuple):
    part: str
    offset: int
    length: int


@dataclass(frozen=True)
class FusionSpec:
    parts: tuple[str, ...]
    mode: str = "concat"
    pca_dim: int = 200
    l2_normalize: bool = False

    def __post_init__(self):
        if not self.parts:
            raise ValueError("fusion needs at least one source part")
        if self.mode not in FUSION_MODES:
            raise ValueError(f"mode must be one of {FUSION_MODES}")
        object.__setattr__(self, "parts", tuple(self.parts))


def segment_map(parts: Sequence[str], stores: Mapping[str, VectorTable]) -> list[Segment]:
    segs = []
    offset = 0
    for name in parts:
        if name not in stores:
            raise KeyError(f"no vector store registered for part {name!r}")
        length = stores[name].dim
        segs.append(Segment(name, offset, length))
        offset += length
    return segs


def concat_features(
    entity: str,
    parts: Sequence[str],
    stores: Mapping[str, VectorTable],
    l2_normalize: bool = False,
) -> tuple[np.ndarray, list[str]]:
    """Concatenate part vectors in order; a missing part contributes zeros.

    Returns the vector and the list of parts the entity was missing from.
    """
    chunks = []
    missed = []
    for name in parts:
        store = stores[name]
        vec = store.get(entity)
        if vec is None:
            vec = np.zeros(store.dim, dtype=np.float64)
            missed.append(name)
        elif l2_normalize:
            norm = float(np.linalg.norm(vec))
            vec = vec / norm if norm > 0 else vec
        chunks.append(vec)
    return np.concatenate(chunks) if chunks else np.zeros(0), missed


@dataclass
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing

    @property
    def input_dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def output_dim(self) -> int:
        return int(self.components.shape[0])


def fit_pca(vectors: Iterable[np.ndarray] | np.ndarray, pca_dim: int) -> PcaModel:
    """Eigendecompose the (n-1)-normalized covariance of the mean-centered data.

    Components are the top pca_dim eigenvectors by eigenvalue, each flipped so
    its largest-magnitude coordinate is positive.
    """
    X = np.asarray(list(vectors) if not isinstance(vectors, np.ndarray) else vectors, dtype=np.float64)
    if X.ndim != 2:
        raise DimMismatch("fit_pca expects a collection of equal-length vectors")
    n, d = X.shape
    if n < 2 or len(np.unique(X, axis=0)) < 2:
        raise DegenerateInput("PCA needs at least 2 distinct vectors")
    if pca_dim > d:
        raise DimMismatch(f"pca_dim={pca_dim} exceeds input dimension {d}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / (n - 1)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(evals)[::-1][:pca_dim]
    components = evecs[:, order].T.copy()
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    explained = np.clip(evals[order], 0.0, None)
    return PcaModel(mean, components, explained)


def apply_pca(model: PcaModel, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.input_dim:
        raise DimMismatch(f"vector dim {v.shape[-1]} != model input dim {model.input_dim}")
    return (v - model.mean) @ model.components.T


@dataclass
class FusedStore:
    vectors: dict[str, np.ndarray]
    segments: list[Segment]  # layout of the pre-PCA concatenated vector
    dim: int
    spec: FusionSpec
    miss_counts: Counter = field(default_factory=Counter)

    def get(self, iri: str) -> np.ndarray | None:
        return self.vectors.get(iri)

    def __len__(self) -> int:
        return len(self.vectors)


def build_fused_store(
    entities: Sequence[str],
    spec: FusionSpec,
    stores: Mapping[str, VectorTable],
    population: Sequence[str] | None = None,
) -> tuple[FusedStore, PcaModel | None]:
    """Fuse features for the given entities.

    concat: raw concatenation.  lpca: PCA fitted on the entities' own
    concatenated vectors.  gpca: PCA fitted on the concatenated vectors of
    `population` (all graph entities), then applied to the dataset entities.
    """
    segs = segment_map(spec.parts, stores)
    concat_dim = segs[-1].offset + segs[-1].length if segs else 0
    misses: Counter = Counter()

    def cat(iri: str) -> np.ndarray:
        vec, missed = concat_features(iri, spec.parts, stores, spec.l2_normalize)
        for name in missed:
            misses[name] += 1
        return vec

    raw = {iri: cat(iri) for iri in entities}
    if spec.mode == "concat":
        return FusedStore(raw, segs, concat_dim, spec, misses), None

    if spec.pca_dim > concat_dim:
        raise DimMismatch(f"pca_dim={spec.pca_dim} exceeds concatenated dim {concat_dim}")
    if spec.mode == "lpca":
        fit_on = np.array([raw[iri] for iri in entities])
    else:
        if population is None:
            raise ValueError("gpca needs the graph entity population")
        # misses among non-dataset population entities are not part of the
        # dataset accounting; count them separately under a marker key
        pop_vecs = []
        for iri in population:
            if iri in raw:
                pop_vecs.append(raw[iri])
            else:
                vec, _ = concat_features(iri, spec.parts, stores, spec.l2_normalize)
                pop_vecs.append(vec)
        fit_on = np.array(pop_vecs)
    model = fit_pca(fit_on, spec.pca_dim)
    projected = {iri: apply_pca(model, vec) for iri, vec in raw.items()}
    return FusedStore(projected, segs, spec.pca_dim, spec, misses), model


def save_fused_store(store: FusedStore, path: str) -> None:
    """Same text format as embeddings, plus a JSON sidecar with spec and layout."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(store.vectors)} {store.dim}\n")
        for iri in store.vectors:
            row = " ".join(str(x) for x in store.vectors[iri].tolist())
            f.write(f"{iri} {row}\n")
    meta = {
        "parts": list(store.spec.parts),
        "mode": store.spec.mode,
        "pca_dim": store.spec.pca_dim,
        "l2_normalize": store.spec.l2_normalize,
        "dim": store.dim,
        "segments": [{"part": s.part, "offset": s.offset, "length": s.length} for s in store.segments],
        "miss_counts": dict(sorted(store.miss_counts.items())),
    }
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump(meta, f, sort_keys=True, indent=2)
        f.write("\n")


def load_fused_store(path: str) -> FusedStore:
    with open(path + ".json", "r", encoding="utf-8") as f:
        meta = json.load(f)
    vectors: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}: expected header '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])
        if dim != meta["dim"]:
            raise DimMismatch(f"{path}: sidecar dim {meta['dim']} != header dim {dim}")
        for line in f:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DimMismatch(f"{path}: row width {len(parts) - 1}, expected {dim}")
            vectors[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
        if len(vectors) != count:
            raise FormatError(f"{path}: header promised {count} rows, found {len(vectors)}")
    spec = FusionSpec(
        tuple(meta["parts"]), meta["mode"], meta["pca_dim"], meta.get("l2_normalize", False)
    )
    segments = [Segment(s["part"], s["offset"], s["length"]) for s in meta["segments"]]
    return FusedStore(vectors, segments, dim, spec, Counter(meta.get("miss_counts", {})))
