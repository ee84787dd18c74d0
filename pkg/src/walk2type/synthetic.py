"""Bundled synthetic knowledge-graph generator.

Builds a typed KG with 3 coarse types x 2 subtypes each.  Every subtype has
characteristic predicates; both subtypes of a coarse type share a pool of
neighbor hubs, and hub pools of adjacent coarse types overlap.  The result:
predicate tokens identify subtypes exactly, entity-neighborhood tokens carry
only noisy coarse-level signal, and a slice of edges is pure global noise.
This makes the dataset separable from walk corpora while keeping the
entity-only channel strictly weaker than predicate-bearing channels.

Entities also funnel into short category chains ending at a sink, so walks
exercise early truncation.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

BASE = "http://example.org/kg"
COARSE = ("alpha", "beta", "gamma")
SUBTYPES = tuple(f"{c}{i}" for c in COARSE for i in (1, 2))

N_COARSE_HUBS = 12  # shared ring; coarse type c draws from hubs[4c : 4c+6] (wrapping)
N_GLOBAL_HUBS = 8
N_GLOBAL_PREDICATES = 3


def class_iri(name: str) -> str:
    return f"{BASE}/class/{name}"


@dataclass
class SyntheticPaths:
    out_dir: str
    graph: str
    labels_fine: str
    labels_coarse: str
    hierarchy: str


def _hub_pool(coarse_index: int) -> list[int]:
    start = 4 * coarse_index
    return [(start + k) % N_COARSE_HUBS for k in range(6)]


def generate_synthetic_dataset(
    out_dir: str,
    entities_per_subtype: int = 150,
    seed: int = 7,
    subtype_edges: int = 2,
    coarse_edges: int = 2,
    noise_edges: int = 4,
) -> SyntheticPaths:
    """Write graph.nt, labels_fine.tsv, labels_coarse.tsv, hierarchy.tsv."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5E7])))
    triples: set[tuple[str, str, str]] = set()

    hubs = [f"{BASE}/hub/{i:02d}" for i in range(N_COARSE_HUBS)]
    ghubs = [f"{BASE}/ghub/{i:02d}" for i in range(N_GLOBAL_HUBS)]
    gpreds = [f"{BASE}/p/shared/{i}" for i in range(N_GLOBAL_PREDICATES)]
    member_of = f"{BASE}/p/memberOf"
    broader = f"{BASE}/p/broader"
    root = f"{BASE}/cat/root"

    # hub ring funnels into 3 regions; global hubs into their own region
    for i, hub in enumerate(hubs):
        triples.add((hub, member_of, f"{BASE}/cat/region{i // 4}"))
    for g in ghubs:
        triples.add((g, member_of, f"{BASE}/cat/shared"))
    for k in range(3):
        triples.add((f"{BASE}/cat/region{k}", broader, root))
    triples.add((f"{BASE}/cat/shared", broader, root))

    fine_labels: list[tuple[str, str]] = []
    coarse_labels: list[tuple[str, str]] = []
    for ci, coarse in enumerate(COARSE):
        pool = [hubs[j] for j in _hub_pool(ci)]
        cpreds = [f"{BASE}/p/{coarse}/{k}" for k in range(2)]
        for si in (1, 2):
            subtype = f"{coarse}{si}"
            spreds = [f"{BASE}/p/{subtype}/{k}" for k in range(2)]
            for n in range(entities_per_subtype):
                e = f"{BASE}/entity/{subtype}/{n:04d}"
                fine_labels.append((e, class_iri(subtype)))
                coarse_labels.append((e, class_iri(coarse)))
                for pred, hub in _pick_pairs(rng, spreds, pool, subtype_edges):
                    triples.add((e, pred, hub))
                for pred, hub in _pick_pairs(rng, cpreds, pool, coarse_edges):
                    triples.add((e, pred, hub))
                for pred, hub in _pick_pairs(rng, gpreds, ghubs, noise_edges):
                    triples.add((e, pred, hub))

    os.makedirs(out_dir, exist_ok=True)
    paths = SyntheticPaths(
        out_dir=out_dir,
        graph=os.path.join(out_dir, "graph.nt"),
        labels_fine=os.path.join(out_dir, "labels_fine.tsv"),
        labels_coarse=os.path.join(out_dir, "labels_coarse.tsv"),
        hierarchy=os.path.join(out_dir, "hierarchy.tsv"),
    )
    with open(paths.graph, "w", encoding="utf-8") as f:
        for s, p, o in sorted(triples):
            f.write(f"<{s}> <{p}> <{o}> .\n")
    with open(paths.labels_fine, "w", encoding="utf-8") as f:
        for iri, cls in sorted(fine_labels):
            f.write(f"{iri}\t{cls}\n")
    with open(paths.labels_coarse, "w", encoding="utf-8") as f:
        for iri, cls in sorted(coarse_labels):
            f.write(f"{iri}\t{cls}\n")
    with open(paths.hierarchy, "w", encoding="utf-8") as f:
        for coarse in COARSE:
            f.write(f"{class_iri(coarse)}\n")
        for coarse in COARSE:
            for si in (1, 2):
                f.write(f"{class_iri(f'{coarse}{si}')}\t{class_iri(coarse)}\n")
    return paths


def _pick_pairs(
    rng: np.random.Generator, preds: list[str], targets: list[str], k: int
) -> list[tuple[str, str]]:
    """k distinct (predicate, target) pairs from the product space."""
    total = len(preds) * len(targets)
    k = min(k, total)
    chosen = rng.choice(total, size=k, replace=False)
    return [(preds[int(c) // len(targets)], targets[int(c) % len(targets)]) for c in chosen]
