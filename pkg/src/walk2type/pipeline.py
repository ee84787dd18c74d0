"""Experiment orchestration: dataset loading, staged execution
(walk -> embed -> fuse -> train -> eval), and run manifests.

Stages are memoized through the manifest: a stage is skipped when its
settings hash, its input file digests, and its recorded output digests all
match what is on disk.  Stage outputs that depend on fusion/classifier
settings carry a short settings hash in their filename so several
experiment configs can share one output directory (and thus share walk and
embedding artifacts).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
import yaml

from . import __version__
from .classify import (
    LabeledDataset,
    Mlp,
    TrainSpec,
    TypeHierarchy,
    load_model,
    predict_batch,
    predict_hierarchical,
    project_labels,
    save_model,
    train_classifier,
    train_lpl,
)
from .embed import TrainConfig, load_embeddings, save_embeddings, train
from .errors import OverlapSplit, StageError, UnknownClass
from .fusion import (
    FusedStore,
    FusionSpec,
    VectorTable,
    build_fused_store,
    load_description_vectors,
    load_fused_store,
    save_fused_store,
)
from .graph import KnowledgeGraph, load_graph
from .metrics import metrics_report
from .walks import WalkConfig, derive_corpus, generate_corpus, read_corpus, write_corpus

logger = logging.getLogger(__name__)

REGIMES = ("multiclass", "multilabel", "hierarchical")
EMBED_VARIANTS = (
    "classic",
    "classic_oa",
    "entity",
    "entity_oa",
    "predicate",
    "predicate_oa",
)
_MASK64 = (1 << 64) - 1


def variant_strategy(variant: str) -> tuple[str, bool]:
    """Split an embedding variant name into (walk strategy, order_aware)."""
    if variant not in EMBED_VARIANTS:
        raise ValueError(f"unknown embedding variant {variant!r}")
    if variant.endswith("_oa"):
        return variant[:-3], True
    return variant, False


def derive_seed(seed: int, tag: str) -> int:
    """Stable per-stage seed derivation from the global seed."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK64


@dataclass(frozen=True)
class WalkSettings:
    depth: int = 8
    walks_per_entity: int = 500
    dedup: bool = True
    seed: int | None = None  # derived from the global seed when unset
    exclude_predicates: tuple[str, ...] = ()


@dataclass(frozen=True)
class EmbedSettings:
    dim: int = 200
    epochs: int = 5
    window: int = 5
    negatives: int = 5
    lr_initial: float = 0.025
    lr_final: float = 0.0001
    min_count: int = 1
    architecture: str = "sg"
    subsample: float = 0.0


@dataclass(frozen=True)
class FusionSettings:
    parts: tuple[str, ...] = ("classic_oa", "entity_oa", "predicate_oa")
    mode: str = "concat"
    pca_dim: int = 200
    pca_population: str = "dataset"  # or "graph"
    l2_normalize: bool = False

    def to_spec(self) -> FusionSpec:
        return FusionSpec(self.parts, self.mode, self.pca_dim, self.l2_normalize)


@dataclass(frozen=True)
class ClassifierSettings:
    regime: str = "multiclass"
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    hidden: tuple[int, int] = (512, 256)
    early_stop_patience: int | None = None
    weight_report_epochs: tuple[int, ...] = (1, 10)

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")


@dataclass(frozen=True)
class SplitSettings:
    mode: str = "auto"  # or "files"
    fractions: tuple[float, float, float] = (0.5, 0.3, 0.2)  # train/test/validation
    seed: int | None = None
    train: str | None = None
    test: str | None = None
    validation: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    graph: str
    labels: str
    out_dir: str
    hierarchy: str | None = None
    descriptions: str | None = None
    seed: int = 1
    walks: WalkSettings = field(default_factory=WalkSettings)
    embeddings: EmbedSettings = field(default_factory=EmbedSettings)
    fusion: FusionSettings = field(default_factory=FusionSettings)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    split: SplitSettings = field(default_factory=SplitSettings)

    def validate(self) -> None:
        for path in [self.graph, self.labels, self.hierarchy, self.descriptions]:
            if path is not None and not os.path.exists(path):
                raise FileNotFoundError(path)
        if self.classifier.regime == "hierarchical" and self.hierarchy is None:
            raise ValueError("hierarchical regime needs a hierarchy file")
        if "description" in self.fusion.parts and self.descriptions is None:
            raise ValueError("fusion uses descriptions but no description file is configured")


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)

    def sub(key, cls):
        data = raw.pop(key, {}) or {}
        for k in ("parts", "exclude_predicates", "weight_report_epochs", "hidden", "fractions"):
            if k in data and isinstance(data[k], list):
                data[k] = tuple(data[k])
        return cls(**data)

    walks = sub("walks", WalkSettings)
    embeddings = sub("embeddings", EmbedSettings)
    fusion = sub("fusion", FusionSettings)
    classifier = sub("classifier", ClassifierSettings)
    split = sub("split", SplitSettings)
    return ExperimentConfig(
        walks=walks, embeddings=embeddings, fusion=fusion, classifier=classifier, split=split, **raw
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    return config_from_dict(raw)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def settings_hash(obj, extra: dict | None = None) -> str:
    data = asdict(obj) if hasattr(obj, "__dataclass_fields__") else obj
    payload = {"settings": data, "extra": extra or {}, "tool": __version__}
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()[:16]


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# dataset loading


def read_labels(path: str) -> list[tuple[str, frozenset[str]]]:
    """TSV `iri \\t class[,class...]`, one entity per line."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 or not parts[1].strip():
                raise ValueError(f"{path}:{line_no}: expected `iri \\t class[,class...]`")
            labels = frozenset(c.strip() for c in parts[1].split(",") if c.strip())
            out.append((parts[0].strip(), labels))
    return out


def _read_iri_list(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def auto_split(
    iris: Sequence[str], fractions: tuple[float, float, float], seed: int
) -> tuple[list[str], list[str], list[str]]:
    """Seeded 50/30/20-style split: floor(train), floor(test), remainder validation."""
    ordered = sorted(iris)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & _MASK64, 0x5F117])))
    perm = rng.permutation(len(ordered))
    n = len(ordered)
    n_train = int(fractions[0] * n)
    n_test = int(fractions[1] * n)
    shuffled = [ordered[i] for i in perm]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_test],
        shuffled[n_train + n_test :],
    )


def load_dataset(
    labels_path: str,
    hierarchy_path: str | None,
    split: SplitSettings,
    regime: str,
    global_seed: int = 1,
) -> tuple[LabeledDataset, TypeHierarchy | None]:
    rows = read_labels(labels_path)
    by_iri = {}
    for iri, labels in rows:
        by_iri[iri] = labels | by_iri.get(iri, frozenset())
    if regime == "multiclass":
        for iri, labels in by_iri.items():
            if len(labels) != 1:
                raise ValueError(
                    f"multi-class regime requires exactly one label per entity; {iri} has {len(labels)}"
                )

    hierarchy = TypeHierarchy.from_tsv(hierarchy_path) if hierarchy_path else None
    if regime == "hierarchical":
        assert hierarchy is not None
        for iri, labels in by_iri.items():
            for c in labels:
                if c not in hierarchy:
                    raise UnknownClass(iri, c)

    if split.mode == "files":
        groups = []
        for name, path in [("train", split.train), ("test", split.test), ("validation", split.validation)]:
            if path is None:
                raise ValueError(f"split mode 'files' needs a {name} file")
            groups.append(_read_iri_list(path))
        train_iris, test_iris, val_iris = groups
    else:
        seed = split.seed if split.seed is not None else derive_seed(global_seed, "split")
        train_iris, test_iris, val_iris = auto_split(list(by_iri), split.fractions, seed)

    sets = [set(train_iris), set(test_iris), set(val_iris)]
    if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
        raise OverlapSplit("train/test/validation splits share entities")

    def rowify(iris: Iterable[str]):
        return [(iri, by_iri[iri]) for iri in iris if iri in by_iri]

    classes = sorted({c for labels in by_iri.values() for c in labels})
    data = LabeledDataset(rowify(train_iris), rowify(val_iris), rowify(test_iris), classes)
    return data, hierarchy


# ---------------------------------------------------------------------------
# staged runner


@dataclass
class Manifest:
    path: str
    data: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str) -> "Manifest":
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as f:
                return cls(path, json.load(f))
        return cls(path, {"tool_version": __version__, "stages": {}})

    def save(self) -> None:
        self.data["tool_version"] = __version__
        with open(self.path, "w", encoding="utf-8") as f:
            json.dump(self.data, f, sort_keys=True, indent=2)
            f.write("\n")

    def stage_fresh(self, name: str, stage_hash: str, inputs: dict[str, str], outputs: list[str]) -> bool:
        """True when the recorded stage still matches everything on disk."""
        rec = self.data["stages"].get(name)
        if rec is None or rec.get("hash") != stage_hash:
            return False
        if rec.get("inputs") != inputs:
            return False
        for path, digest in rec.get("outputs", {}).items():
            if not os.path.exists(path) or file_digest(path) != digest:
                return False
        return set(rec.get("outputs", {})) == {os.path.abspath(p) for p in outputs}

    def record(self, name: str, stage_hash: str, inputs: dict[str, str], outputs: list[str], seconds: float):
        self.data["stages"][name] = {
            "hash": stage_hash,
            "inputs": inputs,
            "outputs": {os.path.abspath(p): file_digest(p) for p in outputs},
            "seconds": round(seconds, 3),
        }
        self.save()


@dataclass
class RunResult:
    metrics: dict
    metrics_path: str
    manifest_path: str
    skipped_stages: list[str]
    executed_stages: list[str]
    weights_path: str | None = None


def _run_stage(manifest: Manifest, name: str, stage_hash: str, input_paths: list[str], outputs: list[str], fn) -> bool:
    """Execute fn() unless the manifest proves outputs are current.  Returns
    True when the stage was skipped."""
    inputs = {os.path.abspath(p): file_digest(p) for p in input_paths}
    if manifest.stage_fresh(name, stage_hash, inputs, outputs):
        logger.info("stage %s: outputs current, skipping", name)
        return True
    logger.info("stage %s: running", name)
    t0 = time.perf_counter()
    try:
        fn()
    except Exception as exc:
        raise StageError(name, exc) from exc
    manifest.record(name, stage_hash, inputs, outputs, time.perf_counter() - t0)
    return False


def run(
    config: ExperimentConfig,
    deterministic: bool = False,
    threads: int = 1,
    backend: str = "auto",
) -> RunResult:
    """Execute the full pipeline for one experiment configuration."""
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    manifest = Manifest.load(os.path.join(config.out_dir, "manifest.json"))
    skipped: list[str] = []
    executed: list[str] = []
    if deterministic:
        threads = 1

    def track(name: str, was_skipped: bool):
        (skipped if was_skipped else executed).append(name)

    graph, _report = load_graph(config.graph, exclude_predicates=config.walks.exclude_predicates)

    # --- walk stage: classic corpus once, entity/predicate derived from it
    walk_seed = config.walks.seed if config.walks.seed is not None else derive_seed(config.seed, "walk")
    corpus_paths = {s: os.path.join(config.out_dir, f"corpus_{s}.txt") for s in ("classic", "entity", "predicate")}
    walk_hash = settings_hash(config.walks, {"seed": walk_seed})

    def do_walks():
        cfg = WalkConfig(
            depth=config.walks.depth,
            walks_per_entity=config.walks.walks_per_entity,
            strategy="classic",
            seed=walk_seed,
            dedup=config.walks.dedup,
        )
        classic = generate_corpus(graph, cfg)
        write_corpus(classic, corpus_paths["classic"])
        for strategy in ("entity", "predicate"):
            write_corpus(derive_corpus(classic, strategy), corpus_paths[strategy])

    track("walk", _run_stage(manifest, "walk", walk_hash, [config.graph], list(corpus_paths.values()), do_walks))

    # --- embed stage: one training per required variant
    variants = sorted({p for p in config.fusion.parts if p != "description"})
    vector_paths: dict[str, str] = {}
    for variant in variants:
        strategy, order_aware = variant_strategy(variant)
        out_path = os.path.join(config.out_dir, f"vectors_{variant}.txt")
        vector_paths[variant] = out_path
        seed = derive_seed(config.seed, f"embed:{variant}")
        train_cfg = TrainConfig(
            dim=config.embeddings.dim,
            epochs=config.embeddings.epochs,
            window=config.embeddings.window,
            negatives=config.embeddings.negatives,
            lr_initial=config.embeddings.lr_initial,
            lr_final=config.embeddings.lr_final,
            order_aware=order_aware,
            architecture=config.embeddings.architecture,
            seed=seed,
            min_count=config.embeddings.min_count,
            subsample=config.embeddings.subsample,
        )
        stage_hash = settings_hash(train_cfg, {"variant": variant, "threads": threads if not deterministic else 1})

        def do_embed(cfg=train_cfg, strategy=strategy, path=out_path):
            corpus = read_corpus(corpus_paths[strategy])
            matrix = train(corpus.sentences, cfg, threads=threads, backend=backend)
            save_embeddings(matrix, path)

        track(
            f"embed:{variant}",
            _run_stage(
                manifest, f"embed:{variant}", stage_hash,
                [corpus_paths[strategy]], [out_path, out_path + ".json"], do_embed,
            ),
        )

    # --- dataset (in-memory, deterministic)
    data, hierarchy = load_dataset(
        config.labels, config.hierarchy, config.split, config.classifier.regime, config.seed
    )
    dataset_entities = sorted(
        {iri for iri, _ in data.train} | {iri for iri, _ in data.validation} | {iri for iri, _ in data.test}
    )

    # --- fuse stage
    fusion_hash = settings_hash(
        config.fusion,
        {"labels": config.labels, "split": asdict(config.split), "seed": config.seed},
    )
    fused_path = os.path.join(config.out_dir, f"fused_{fusion_hash}.txt")
    fuse_inputs = [vector_paths[v] for v in variants] + [config.labels]
    if config.descriptions and "description" in config.fusion.parts:
        fuse_inputs.append(config.descriptions)

    def do_fuse():
        stores = {v: VectorTable.from_embeddings(load_embeddings(vector_paths[v])) for v in variants}
        if "description" in config.fusion.parts:
            stores["description"] = load_description_vectors(config.descriptions)
        population = graph.entities if config.fusion.pca_population == "graph" else None
        store, _model = build_fused_store(dataset_entities, config.fusion.to_spec(), stores, population)
        save_fused_store(store, fused_path)

    track(
        "fuse",
        _run_stage(manifest, "fuse", fusion_hash, fuse_inputs, [fused_path, fused_path + ".json"], do_fuse),
    )

    # --- train stage
    clf_hash = settings_hash(
        config.classifier,
        {"fusion": fusion_hash, "seed": config.seed, "hierarchy": config.hierarchy},
    )
    regime = config.classifier.regime
    spec = TrainSpec(
        batch_size=config.classifier.batch_size,
        epochs=config.classifier.epochs,
        lr=config.classifier.lr,
        seed=derive_seed(config.seed, "classifier"),
        early_stop_patience=config.classifier.early_stop_patience,
        hidden=config.classifier.hidden,
    )
    if regime == "hierarchical":
        assert hierarchy is not None
        n_levels = hierarchy.max_level
        model_paths = [os.path.join(config.out_dir, f"model_{clf_hash}_L{k}.bin") for k in range(1, n_levels + 1)]
    else:
        model_paths = [os.path.join(config.out_dir, f"model_{clf_hash}.bin")]
    weights_path = (
        os.path.join(config.out_dir, f"weights_{clf_hash}.json")
        if config.classifier.weight_report_epochs and config.fusion.mode == "concat" and regime != "hierarchical"
        else None
    )
    train_outputs = list(model_paths) + ([weights_path] if weights_path else [])

    def do_train():
        store = load_fused_store(fused_path)
        if regime == "hierarchical":
            head = "softmax"
            models, _hists = train_lpl(data, store, hierarchy, spec, head=head)
            for model, path in zip(models, model_paths):
                save_model(model, path, hierarchy_hash=hierarchy.stable_hash())
        else:
            head = "softmax" if regime == "multiclass" else "sigmoid"
            model, hist = train_classifier(
                data, store, head, spec,
                weight_report_epochs=config.classifier.weight_report_epochs if weights_path else (),
                segments=store.segments if weights_path else None,
            )
            save_model(model, model_paths[0])
            if weights_path:
                payload = {str(r.epoch): r.fractions for r in hist.weight_reports}
                with open(weights_path, "w", encoding="utf-8") as f:
                    json.dump(payload, f, sort_keys=True, indent=2)
                    f.write("\n")

    track(
        "train",
        _run_stage(manifest, "train", clf_hash, [fused_path, config.labels], train_outputs, do_train),
    )

    # --- eval stage
    metrics_path = os.path.join(config.out_dir, f"metrics_{clf_hash}.json")

    def do_eval():
        store = load_fused_store(fused_path)
        if regime == "hierarchical":
            models = [load_model(p) for p in model_paths]
            payload = _evaluate_hierarchical(models, hierarchy, data, store)
        else:
            model = load_model(model_paths[0])
            X = np.vstack([store.get(iri) for iri, _ in data.test])
            preds = predict_batch(model, X)
            gold = [labels for _, labels in data.test]
            payload = metrics_report(list(zip(preds, gold)), data.classes)
        with open(metrics_path, "w", encoding="utf-8") as f:
            json.dump(payload, f, sort_keys=True, indent=2)
            f.write("\n")

    track(
        "eval",
        _run_stage(manifest, "eval", clf_hash, model_paths + [fused_path], [metrics_path], do_eval),
    )

    with open(metrics_path, "r", encoding="utf-8") as f:
        metrics = json.load(f)
    return RunResult(metrics, metrics_path, manifest.path, skipped, executed, weights_path)


def _evaluate_hierarchical(
    models: list[Mlp], hierarchy: TypeHierarchy, data: LabeledDataset, store: FusedStore
) -> dict:
    """Per-level flat metrics (each level model on entities that have gold at
    that level) plus exact-match rate of the repaired prediction paths."""
    levels = {}
    for lvl, model in enumerate(models, start=1):
        examples = project_labels(data.test, hierarchy, lvl)
        if not examples:
            continue
        X = np.vstack([store.get(iri) for iri, _ in examples])
        preds = predict_batch(model, X)
        gold = [labels for _, labels in examples]
        levels[str(lvl)] = metrics_report(list(zip(preds, gold)), hierarchy.classes_at_level(lvl))

    exact = 0
    for iri, labels in data.test:
        path = predict_hierarchical(models, hierarchy, store.get(iri))
        deepest = max(labels, key=lambda c: hierarchy.level[c])
        gold_path = [hierarchy.ancestor_at(deepest, k) for k in range(1, hierarchy.level[deepest] + 1)]
        exact += int(path == gold_path)
    return {
        "levels": levels,
        "path_exact_match": exact / len(data.test) if data.test else 0.0,
    }
