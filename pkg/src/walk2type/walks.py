"""Random-walk corpus generation over a knowledge graph.

Walks are forward-only token sequences starting at a source entity.  A
*classic* walk alternates entity, relation, entity, ...; the *entity* and
*predicate* strategies are derived from classic walks by filtering, so all
three corpora share the exact same underlying samples.

Internally a walk is an int32 array of token codes: entity id ``e`` is coded
as ``2*e`` and relation id ``r`` as ``2*r + 1`` (the low bit is the token
kind).  Corpora are stored flat (one token array plus walk boundaries).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import NotClassicWalk, TokenNotInGraph
from .graph import KnowledgeGraph

STRATEGIES = ("classic", "entity", "predicate")

# dedup keeps sampling until the target count of distinct walks is reached or
# this multiple of walks_per_entity attempts has been spent
OVERSAMPLE_FACTOR = 3


def entity_code(eid: int) -> int:
    return eid << 1

def relation_code(rid: int) -> int:
    return (rid << 1) | 1

def is_entity_code(code: int) -> bool:
    return (code & 1) == 0


@dataclass(frozen=True)
class WalkConfig:
    depth: int = 8
    walks_per_entity: int = 500
    strategy: str = "classic"
    seed: int = 0
    dedup: bool = True

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.walks_per_entity < 1:
            raise ValueError("walks_per_entity must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")


@dataclass
class WalkCorpus:
    """Flat token-coded corpus plus the graph needed to render IRIs."""

    graph: KnowledgeGraph
    tokens: np.ndarray  # int32 codes
    bounds: np.ndarray  # int64, len n_walks + 1
    config: WalkConfig

    def __len__(self) -> int:
        return len(self.bounds) - 1

    def walk(self, i: int) -> np.ndarray:
        return self.tokens[self.bounds[i] : self.bounds[i + 1]]

    def token_str(self, code: int) -> str:
        if is_entity_code(code):
            return self.graph.entity_iri(code >> 1)
        return self.graph.relation_iri(code >> 1)

    def iter_sentences(self) -> Iterator[list[str]]:
        for i in range(len(self)):
            yield [self.token_str(int(c)) for c in self.walk(i)]

    @classmethod
    def from_walks(
        cls, graph: KnowledgeGraph, walks: Sequence[np.ndarray], config: WalkConfig
    ) -> "WalkCorpus":
        bounds = np.zeros(len(walks) + 1, dtype=np.int64)
        for i, w in enumerate(walks):
            bounds[i + 1] = bounds[i] + len(w)
        tokens = np.concatenate([np.asarray(w, dtype=np.int32) for w in walks]) if walks else np.zeros(0, np.int32)
        return cls(graph, tokens, bounds, config)


@dataclass
class TextCorpus:
    """Corpus read back from disk: token strings, not graph ids."""

    sentences: list[list[str]]

    def __len__(self) -> int:
        return len(self.sentences)

    def iter_sentences(self) -> Iterator[list[str]]:
        return iter(self.sentences)

    def resolve(self, graph: KnowledgeGraph, config: WalkConfig) -> WalkCorpus:
        """Map token strings back to graph codes.

        Tokens interned as both entity and relation are disambiguated by
        classic-walk position parity (even offsets are entities).
        """
        walks = []
        for sent in self.sentences:
            codes = np.empty(len(sent), dtype=np.int32)
            for i, tok in enumerate(sent):
                as_entity = graph.has_entity(tok)
                as_relation = graph.has_relation(tok)
                if as_entity and as_relation:
                    as_relation = i % 2 == 1
                    as_entity = not as_relation
                if as_entity:
                    codes[i] = entity_code(graph.entity_id(tok))
                elif as_relation:
                    codes[i] = relation_code(graph.relation_id(tok))
                else:
                    raise TokenNotInGraph(f"token {tok!r} not present in graph")
            walks.append(codes)
        return WalkCorpus.from_walks(graph, walks, config)


def entity_rng(seed: int, entity_id: int) -> np.random.Generator:
    """Per-entity generator; mixing (seed, entity id) keeps worker scheduling irrelevant."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & (2**64 - 1), entity_id])))


def _sample_block(
    graph: KnowledgeGraph, e0: int, n: int, depth: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample n classic walks from e0 as a padded (n, 2*depth+1) code matrix.

    Each step draws uniformly from the current entity's outgoing
    (relation, target) pairs; walks at a sink stop early (padding -1).
    """
    width = 2 * depth + 1
    toks = np.full((n, width), -1, dtype=np.int32)
    toks[:, 0] = entity_code(e0)
    lengths = np.ones(n, dtype=np.int32)
    cur = np.full(n, e0, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    offsets = graph.out_offsets
    degs = np.diff(offsets)
    for h in range(depth):
        deg = degs[cur]
        alive &= deg > 0
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        pick = (rng.random(idx.size) * deg[idx]).astype(np.int64)
        sel = offsets[cur[idx]] + pick
        toks[idx, 2 * h + 1] = (graph.out_rel[sel].astype(np.int64) << 1) | 1
        toks[idx, 2 * h + 2] = graph.out_dst[sel].astype(np.int64) << 1
        cur[idx] = graph.out_dst[sel]
        lengths[idx] += 2
    return toks, lengths


def generate_classic_walks(
    graph: KnowledgeGraph,
    e0: int,
    config: WalkConfig,
    rng: np.random.Generator | None = None,
) -> list[np.ndarray]:
    """Raw (un-deduplicated) classic walks from e0, exactly walks_per_entity samples."""
    graph._check_eid(e0)
    if rng is None:
        rng = entity_rng(config.seed, e0)
    toks, lengths = _sample_block(graph, e0, config.walks_per_entity, config.depth, rng)
    return [toks[i, : lengths[i]].copy() for i in range(toks.shape[0])]


def _check_classic(walk: np.ndarray) -> None:
    w = np.asarray(walk)
    if w.ndim != 1 or w.size % 2 == 0 or w.size == 0:
        raise NotClassicWalk(f"walk of {w.size} tokens cannot alternate entity/relation")
    kinds = w & 1
    if kinds[0::2].any() or not kinds[1::2].all():
        raise NotClassicWalk("walk does not alternate entity, relation, entity, ...")


def derive_entity_walk(walk: np.ndarray) -> np.ndarray:
    """Drop all relation tokens, preserving order."""
    _check_classic(walk)
    return walk[0::2].copy()


def derive_predicate_walk(walk: np.ndarray) -> np.ndarray:
    """Keep the source entity followed by the relation tokens in hop order."""
    _check_classic(walk)
    out = np.empty((len(walk) + 1) // 2, dtype=walk.dtype)
    out[0] = walk[0]
    out[1:] = walk[1::2]
    return out


def _apply_strategy(walk: np.ndarray, strategy: str) -> np.ndarray:
    if strategy == "classic":
        return walk
    if strategy == "entity":
        return derive_entity_walk(walk)
    return derive_predicate_walk(walk)


def generate_corpus(graph: KnowledgeGraph, config: WalkConfig) -> WalkCorpus:
    """Walk every entity and assemble the corpus in entity-id order.

    Classic walks are sampled once per entity from a generator seeded by
    (config.seed, entity id); the strategy filter is applied to each sample,
    and with dedup on, exact duplicates of the *filtered* walk are removed in
    first-seen order.  Sampling for an entity stops as soon as it has
    walks_per_entity distinct walks, or after OVERSAMPLE_FACTOR times that
    many attempts.  Output is a pure function of (graph, config).
    """
    wpe = config.walks_per_entity
    all_walks: list[np.ndarray] = []
    for e0 in range(graph.n_entities):
        rng = entity_rng(config.seed, e0)
        if not config.dedup:
            toks, lengths = _sample_block(graph, e0, wpe, config.depth, rng)
            for i in range(wpe):
                all_walks.append(_apply_strategy(toks[i, : lengths[i]], config.strategy).copy())
            continue
        kept: list[np.ndarray] = []
        seen_classic: set[bytes] = set()
        seen_filtered: set[bytes] = set()
        attempts = 0
        budget = OVERSAMPLE_FACTOR * wpe
        while len(kept) < wpe and attempts < budget:
            n = min(wpe, budget - attempts)
            toks, lengths = _sample_block(graph, e0, n, config.depth, rng)
            attempts += n
            for i in range(n):
                row = toks[i].tobytes()  # fixed-width padding makes this a walk key
                if row in seen_classic:
                    continue
                seen_classic.add(row)
                filtered = _apply_strategy(toks[i, : lengths[i]], config.strategy)
                key = filtered.tobytes()
                if key in seen_filtered:
                    continue
                seen_filtered.add(key)
                kept.append(filtered.copy())
                if len(kept) == wpe:
                    break
        all_walks.extend(kept)
    return WalkCorpus.from_walks(graph, all_walks, config)


def derive_corpus(corpus: WalkCorpus, strategy: str) -> WalkCorpus:
    """Filter an existing classic corpus into an entity- or predicate-only one.

    This is the reuse path: the pipeline generates classic walks once and
    derives the other corpora from those exact samples.  Filtered duplicates
    are removed per source entity when the source config used dedup.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if strategy == "classic":
        return corpus
    walks = []
    seen: set[bytes] = set()
    prev_source: int | None = None
    for i in range(len(corpus)):
        w = corpus.walk(i)
        filtered = _apply_strategy(w, strategy)
        if not corpus.config.dedup:
            walks.append(filtered.copy())
            continue
        source = int(w[0])
        if source != prev_source:  # corpus walks are grouped by source entity
            seen = set()
            prev_source = source
        key = filtered.tobytes()
        if key in seen:
            continue
        seen.add(key)
        walks.append(filtered.copy())
    return WalkCorpus.from_walks(corpus.graph, walks, replace(corpus.config, strategy=strategy))


def write_corpus(corpus: WalkCorpus | TextCorpus, sink: IO[str] | str) -> None:
    """One walk per line, original IRIs separated by single spaces."""
    if isinstance(sink, str):
        with open(sink, "w", encoding="utf-8") as f:
            write_corpus(corpus, f)
        return
    for sent in corpus.iter_sentences():
        sink.write(" ".join(sent))
        sink.write("\n")


def read_corpus(source: IO[str] | str) -> TextCorpus:
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as f:
            return read_corpus(f)
    sentences = [line.split() for line in source if line.strip()]
    return TextCorpus(sentences)
