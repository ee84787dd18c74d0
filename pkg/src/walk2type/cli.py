"""Command-line interface.

Subcommands mirror the pipeline stages (walk, embed, fuse, train, eval) plus
`run` for a full configured experiment and `gen-synthetic` for the bundled
self-test dataset.  Global flags: --seed, --threads, --deterministic
(environment overrides WALK2TYPE_SEED, WALK2TYPE_THREADS,
WALK2TYPE_DETERMINISTIC).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__, pipeline
from .classify import TrainSpec, TypeHierarchy, load_model, predict_batch, save_model, train_classifier, train_lpl
from .embed import TrainConfig, fast_backend_available, load_embeddings, save_embeddings, train
from .fusion import VectorTable, build_fused_store, load_description_vectors, load_fused_store, save_fused_store
from .graph import load_graph
from .metrics import metrics_report
from .walks import WalkConfig, generate_corpus, read_corpus, write_corpus


def _env_int(name: str, default: int) -> int:
    value = os.environ.get(name)
    return int(value) if value else default


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").lower() in ("1", "true", "yes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="walk2type", description=__doc__)
    parser.add_argument("--version", action="version", version=f"walk2type {__version__}")
    parser.add_argument("--seed", type=int, default=_env_int("WALK2TYPE_SEED", 1))
    parser.add_argument("--threads", type=int, default=_env_int("WALK2TYPE_THREADS", 1))
    parser.add_argument(
        "--deterministic",
        action="store_true",
        default=_env_flag("WALK2TYPE_DETERMINISTIC"),
        help="force single-worker, bit-reproducible paths",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("walk", help="generate a walk corpus from an N-Triples graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--strategy", choices=("classic", "entity", "predicate"), default="classic")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--walks", type=int, default=500)
    p.add_argument("--out", required=True)
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--exclude-predicates", default="", help="comma-separated predicate IRIs to drop")
    p.add_argument("--strict", action="store_true", help="abort on malformed input lines")

    p = sub.add_parser("embed", help="train embeddings over a walk corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=200)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--arch", choices=("sg", "cbow"), default="sg")
    p.add_argument("--order-aware", action="store_true")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--lr-initial", type=float, default=0.025)
    p.add_argument("--lr-final", type=float, default=0.0001)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--subsample", type=float, default=0.0)
    p.add_argument("--backend", choices=("auto", "fast", "numpy"), default="auto")

    p = sub.add_parser("fuse", help="assemble fused feature vectors")
    p.add_argument("--part", action="append", default=[], metavar="NAME=VECFILE", required=True)
    p.add_argument("--entities", help="file of entity IRIs to fuse (one per line)")
    p.add_argument("--labels", help="labels TSV; its entities are fused when --entities is absent")
    p.add_argument("--descriptions", help="description-vector TSV for the 'description' part")
    p.add_argument("--mode", choices=("concat", "lpca", "gpca"), default="concat")
    p.add_argument("--pca-dim", type=int, default=200)
    p.add_argument("--l2-normalize", action="store_true")
    p.add_argument("--graph", help="graph file; its entities are the gpca population")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a type classifier on fused features")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--regime", choices=pipeline.REGIMES, default="multiclass")
    p.add_argument("--hierarchy")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--hidden", default="512,256")
    p.add_argument("--split-seed", type=int)
    p.add_argument("--out", required=True, help="model path (hierarchical: prefix, one file per level)")

    p = sub.add_parser("eval", help="evaluate a trained classifier on the test split")
    p.add_argument("--model", required=True, help="model path (hierarchical: prefix used at training)")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--regime", choices=pipeline.REGIMES, default="multiclass")
    p.add_argument("--hierarchy")
    p.add_argument("--split-seed", type=int)
    p.add_argument("--out", help="metrics JSON path (default: stdout)")

    p = sub.add_parser("run", help="execute a configured experiment end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--backend", choices=("auto", "fast", "numpy"), default="auto")

    p = sub.add_parser("gen-synthetic", help="write the bundled synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--entities-per-subtype", type=int, default=150)

    p = sub.add_parser("backend-info", help="report which training kernel is active")
    return parser


def _split_settings(args) -> pipeline.SplitSettings:
    return pipeline.SplitSettings(seed=args.split_seed)


def cmd_walk(args) -> int:
    graph, report = load_graph(
        args.graph,
        strict=args.strict,
        exclude_predicates=[s for s in args.exclude_predicates.split(",") if s],
    )
    cfg = WalkConfig(
        depth=args.depth,
        walks_per_entity=args.walks,
        strategy=args.strategy,
        seed=args.seed,
        dedup=not args.no_dedup,
    )
    corpus = generate_corpus(graph, cfg)
    write_corpus(corpus, args.out)
    print(report.to_json())
    return 0


def cmd_embed(args) -> int:
    corpus = read_corpus(args.corpus)
    cfg = TrainConfig(
        dim=args.dim,
        epochs=args.epochs,
        window=args.window,
        negatives=args.negatives,
        lr_initial=args.lr_initial,
        lr_final=args.lr_final,
        order_aware=args.order_aware,
        architecture=args.arch,
        seed=args.seed,
        min_count=args.min_count,
        subsample=args.subsample,
    )
    threads = 1 if args.deterministic else args.threads
    matrix = train(corpus.sentences, cfg, threads=threads, backend=args.backend)
    save_embeddings(matrix, args.out)
    return 0


def cmd_fuse(args) -> int:
    stores = {}
    parts = []
    for spec in args.part:
        name, _, path = spec.partition("=")
        if not path:
            raise SystemExit(f"--part expects NAME=VECFILE, got {spec!r}")
        stores[name] = VectorTable.from_embeddings(load_embeddings(path))
        parts.append(name)
    if args.descriptions:
        stores["description"] = load_description_vectors(args.descriptions)
        if "description" not in parts:
            parts.append("description")
    if args.entities:
        with open(args.entities, "r", encoding="utf-8") as f:
            entities = sorted({line.strip() for line in f if line.strip()})
    elif args.labels:
        entities = sorted({iri for iri, _ in pipeline.read_labels(args.labels)})
    else:
        raise SystemExit("fuse needs --entities or --labels")
    population = None
    if args.mode == "gpca":
        if not args.graph:
            raise SystemExit("gpca needs --graph for the fitting population")
        g, _ = load_graph(args.graph)
        population = g.entities
    from .fusion import FusionSpec

    store, _model = build_fused_store(
        entities, FusionSpec(tuple(parts), args.mode, args.pca_dim, args.l2_normalize), stores, population
    )
    save_fused_store(store, args.out)
    return 0


def cmd_train(args) -> int:
    data, hierarchy = pipeline.load_dataset(
        args.labels, args.hierarchy, _split_settings(args), args.regime, args.seed
    )
    store = load_fused_store(args.features)
    hidden = tuple(int(x) for x in args.hidden.split(","))
    spec = TrainSpec(
        batch_size=args.batch_size,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
        hidden=hidden,  # type: ignore[arg-type]
    )
    if args.regime == "hierarchical":
        models, _ = train_lpl(data, store, hierarchy, spec)
        for lvl, model in enumerate(models, start=1):
            save_model(model, f"{args.out}_L{lvl}.bin", hierarchy_hash=hierarchy.stable_hash())
    else:
        head = "softmax" if args.regime == "multiclass" else "sigmoid"
        model, _ = train_classifier(data, store, head, spec)
        save_model(model, args.out)
    return 0


def cmd_eval(args) -> int:
    data, hierarchy = pipeline.load_dataset(
        args.labels, args.hierarchy, _split_settings(args), args.regime, args.seed
    )
    store = load_fused_store(args.features)
    if args.regime == "hierarchical":
        models = []
        lvl = 1
        while os.path.exists(f"{args.model}_L{lvl}.bin"):
            models.append(load_model(f"{args.model}_L{lvl}.bin"))
            lvl += 1
        if not models:
            raise SystemExit(f"no level models found at {args.model}_L*.bin")
        payload = pipeline._evaluate_hierarchical(models, hierarchy, data, store)
    else:
        model = load_model(args.model)
        X = np.vstack([store.get(iri) for iri, _ in data.test])
        preds = predict_batch(model, X)
        payload = metrics_report(list(zip(preds, [g for _, g in data.test])), data.classes)
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_run(args) -> int:
    config = pipeline.load_config(args.config)
    result = pipeline.run(
        config, deterministic=args.deterministic, threads=args.threads, backend=args.backend
    )
    print(json.dumps(
        {
            "metrics": result.metrics,
            "metrics_path": result.metrics_path,
            "skipped_stages": result.skipped_stages,
            "executed_stages": result.executed_stages,
        },
        sort_keys=True,
        indent=2,
    ))
    return 0


def cmd_gen_synthetic(args) -> int:
    from .synthetic import generate_synthetic_dataset

    paths = generate_synthetic_dataset(args.out, args.entities_per_subtype, seed=args.seed)
    print(json.dumps(
        {
            "graph": paths.graph,
            "labels_fine": paths.labels_fine,
            "labels_coarse": paths.labels_coarse,
            "hierarchy": paths.hierarchy,
        },
        sort_keys=True,
        indent=2,
    ))
    return 0


def cmd_backend_info(args) -> int:
    print(json.dumps({"compiled_kernel": fast_backend_available()}, sort_keys=True))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handlers = {
        "walk": cmd_walk,
        "embed": cmd_embed,
        "fuse": cmd_fuse,
        "train": cmd_train,
        "eval": cmd_eval,
        "run": cmd_run,
        "gen-synthetic": cmd_gen_synthetic,
        "backend-info": cmd_backend_info,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
