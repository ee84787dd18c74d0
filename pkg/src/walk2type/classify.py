"""Entity type classifiers.

A two-hidden-layer MLP (ReLU) with a softmax head for multi-class data or a
sigmoid head for multi-label data, trained with mini-batch Adam; plus a
per-level hierarchical wrapper that trains one flat classifier per taxonomy
level and repairs parent inconsistencies at prediction time by truncating
the predicted path at the last consistent level.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CyclicHierarchy,
    DimMismatch,
    EmptyTrainSet,
    InconsistentHierarchy,
    MissingFeature,
    NonFiniteUpdate,
)
from .metrics import micro_f1, weight_group_analysis

_MASK64 = (1 << 64) - 1

HEADS = ("softmax", "sigmoid")


class TypeHierarchy:
    """Single-parent class taxonomy; roots sit at level 1."""

    def __init__(self, parent: Mapping[str, str | None]):
        self.parent: dict[str, str | None] = dict(parent)
        for cls, par in self.parent.items():
            if par is not None and par not in self.parent:
                raise InconsistentHierarchy(f"class {cls} has unknown parent {par}")
        self.level: dict[str, int] = {}
        for cls in self.parent:
            self._resolve_level(cls)
        self.classes = sorted(self.parent)

    def _resolve_level(self, cls: str) -> int:
        chain = []
        cur = cls
        while cur is not None and cur not in self.level:
            if cur in chain:
                raise CyclicHierarchy(f"cycle through class {cur}")
            chain.append(cur)
            cur = self.parent[cur]
        base = 0 if cur is None else self.level[cur]
        for c in reversed(chain):
            base += 1
            self.level[c] = base
        return self.level[cls]

    def __contains__(self, cls: str) -> bool:
        return cls in self.parent

    @property
    def max_level(self) -> int:
        return max(self.level.values())

    def classes_at_level(self, lvl: int) -> list[str]:
        return sorted(c for c, d in self.level.items() if d == lvl)

    def ancestor_at(self, cls: str, lvl: int) -> str | None:
        """The ancestor of cls at the given level; None when cls is shallower."""
        if cls not in self.parent:
            raise InconsistentHierarchy(f"class {cls} not in hierarchy")
        d = self.level[cls]
        if lvl > d:
            return None
        cur = cls
        for _ in range(d - lvl):
            cur = self.parent[cur]
        return cur

    def stable_hash(self) -> str:
        text = "\n".join(f"{c}\t{self.parent[c] or ''}" for c in sorted(self.parent))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_tsv(cls, source: IO[str] | str) -> "TypeHierarchy":
        """Lines `class \\t parent`; root classes omit the parent field."""
        if isinstance(source, str):
            with open(source, "r", encoding="utf-8") as f:
                return cls.from_tsv(f)
        parent: dict[str, str | None] = {}
        for line in source:
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            name = parts[0].strip()
            par = parts[1].strip() if len(parts) > 1 and parts[1].strip() else None
            if name in parent and parent[name] != par:
                raise InconsistentHierarchy(f"class {name} listed with two parents")
            parent[name] = par
        return cls(parent)


@dataclass
class LabeledDataset:
    train: list[tuple[str, frozenset[str]]]
    validation: list[tuple[str, frozenset[str]]]
    test: list[tuple[str, frozenset[str]]]
    classes: list[str]

    def split(self, name: str) -> list[tuple[str, frozenset[str]]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}[name]


@dataclass(frozen=True)
class TrainSpec:
    batch_size: int = 64
    epochs: int = 100
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    early_stop_patience: int | None = None
    hidden: tuple[int, int] = (512, 256)


@dataclass
class Mlp:
    """Dense(in->h1)+ReLU, Dense(h1->h2)+ReLU, Dense(h2->n_classes)."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    head: str
    classes: list[str]

    @property
    def input_dim(self) -> int:
        return int(self.W1.shape[0])

    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def copy_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params()]

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        for dst, src in zip(self.params(), params):
            dst[...] = src


def init_mlp(
    input_dim: int, hidden: tuple[int, int], classes: Sequence[str], head: str, seed: int
) -> Mlp:
    """He-initialized hidden layers; near-zero output layer so the softmax
    starts close to uniform (initial loss about ln K on balanced data)."""
    if head not in HEADS:
        raise ValueError(f"head must be one of {HEADS}")
    h1, h2 = hidden
    k = len(classes)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & _MASK64, 0xC1A55])))
    W1 = rng.normal(0.0, np.sqrt(2.0 / input_dim), (input_dim, h1))
    W2 = rng.normal(0.0, np.sqrt(2.0 / h1), (h1, h2))
    W3 = rng.normal(0.0, np.sqrt(2.0 / h2), (h2, k)) * 0.01
    return Mlp(W1, np.zeros(h1), W2, np.zeros(h2), W3, np.zeros(k), head, list(classes))


def forward(m: Mlp, x: np.ndarray) -> np.ndarray:
    """Raw scores; accepts a single vector or a batch matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != m.input_dim:
        raise DimMismatch(f"input dim {X.shape[1]} != model dim {m.input_dim}")
    a1 = np.maximum(X @ m.W1 + m.b1, 0.0)
    a2 = np.maximum(a1 @ m.W2 + m.b2, 0.0)
    logits = a2 @ m.W3 + m.b3
    return logits[0] if single else logits


def softmax_ce(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Cross-entropy of a softmax over raw scores, with max-subtraction.

    Returns (loss, gradient with respect to the logits)."""
    s = np.asarray(logits, dtype=np.float64)
    if not 0 <= target < s.shape[-1]:
        raise IndexError(f"target {target} outside {s.shape[-1]} classes")
    z = s - s.max()
    log_probs = z - np.log(np.exp(z).sum())
    probs = np.exp(log_probs)
    grad = probs.copy()
    grad[target] -= 1.0
    return float(-log_probs[target]), grad


def _sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s, dtype=np.float64)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_bce(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed per-class binary cross-entropy in stable log-sigmoid form.

    Returns (loss, gradient sigma(s) - t with respect to the logits)."""
    s = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if s.shape != t.shape:
        raise DimMismatch(f"{len(t)} targets for {len(s)} logits")
    # -t*log s(s) - (1-t)*log(1 - s(s)) == softplus(-s)*t + softplus(s)*(1-t)
    loss = float((t * np.logaddexp(0.0, -s) + (1.0 - t) * np.logaddexp(0.0, s)).sum())
    return loss, _sigmoid(s) - t


def batch_loss_and_grads(
    m: Mlp, X: np.ndarray, targets: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Mean loss over the batch and gradients for every parameter.

    targets: int class indices for the softmax head, a multi-hot (n, K)
    matrix for the sigmoid head.
    """
    n = X.shape[0]
    z1 = X @ m.W1 + m.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ m.W2 + m.b2
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ m.W3 + m.b3

    if m.head == "softmax":
        z = logits - logits.max(axis=1, keepdims=True)
        log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        loss = float(-log_probs[np.arange(n), targets].mean())
        dlogits = np.exp(log_probs)
        dlogits[np.arange(n), targets] -= 1.0
        dlogits /= n
    else:
        t = targets
        loss = float((t * np.logaddexp(0.0, -logits) + (1.0 - t) * np.logaddexp(0.0, logits)).sum() / n)
        dlogits = (_sigmoid(logits) - t) / n

    dW3 = a2.T @ dlogits
    db3 = dlogits.sum(axis=0)
    dz2 = (dlogits @ m.W3.T) * (z2 > 0)
    dW2 = a1.T @ dz2
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ m.W2.T) * (z1 > 0)
    dW1 = X.T @ dz1
    db1 = dz1.sum(axis=0)
    return loss, [dW1, db1, dW2, db2, dW3, db3]


class Adam:
    def __init__(self, params: Sequence[np.ndarray], spec: TrainSpec):
        self.spec = spec
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        sp = self.spec
        self.t += 1
        b1t = 1.0 - sp.beta1**self.t
        b2t = 1.0 - sp.beta2**self.t
        for p, g, mom, var in zip(params, grads, self.m, self.v):
            mom *= sp.beta1
            mom += (1.0 - sp.beta1) * g
            var *= sp.beta2
            var += (1.0 - sp.beta2) * g * g
            p -= sp.lr * (mom / b1t) / (np.sqrt(var / b2t) + sp.eps)


def predict(m: Mlp, x: np.ndarray) -> frozenset[str]:
    """Softmax: argmax (smallest class id on ties).  Sigmoid: every class with
    probability >= 0.5, falling back to the single best class so the
    prediction is never empty."""
    logits = forward(m, x)
    if m.head == "softmax":
        return frozenset({m.classes[int(np.argmax(logits))]})
    probs = _sigmoid(logits)
    chosen = np.nonzero(probs >= 0.5)[0]
    if chosen.size == 0:
        chosen = np.array([int(np.argmax(probs))])
    return frozenset(m.classes[i] for i in chosen)


def predict_batch(m: Mlp, X: np.ndarray) -> list[frozenset[str]]:
    logits = forward(m, X)
    preds = []
    if m.head == "softmax":
        for row in logits:
            preds.append(frozenset({m.classes[int(np.argmax(row))]}))
    else:
        probs = _sigmoid(logits)
        for row in probs:
            chosen = np.nonzero(row >= 0.5)[0]
            if chosen.size == 0:
                chosen = np.array([int(np.argmax(row))])
            preds.append(frozenset(m.classes[i] for i in chosen))
    return preds


def _feature_matrix(
    examples: Sequence[tuple[str, frozenset[str]]], features
) -> np.ndarray:
    rows = []
    for iri, _ in examples:
        vec = features.get(iri)
        if vec is None:
            raise MissingFeature(f"no feature vector for entity {iri}")
        rows.append(np.asarray(vec, dtype=np.float64))
    return np.vstack(rows)


def _targets(
    examples: Sequence[tuple[str, frozenset[str]]], classes: Sequence[str], head: str
) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    if head == "softmax":
        out = np.empty(len(examples), dtype=np.int64)
        for i, (_, labels) in enumerate(examples):
            if len(labels) != 1:
                raise ValueError(f"softmax head needs exactly one label, got {sorted(labels)}")
            out[i] = index[next(iter(labels))]
        return out
    out = np.zeros((len(examples), len(classes)), dtype=np.float64)
    for i, (_, labels) in enumerate(examples):
        for c in labels:
            out[i, index[c]] = 1.0
    return out


@dataclass
class TrainHistory:
    epoch_losses: list[float] = field(default_factory=list)
    val_micro_f1: list[float] = field(default_factory=list)
    best_epoch: int = 0
    weight_reports: list = field(default_factory=list)


def train_classifier(
    data: LabeledDataset,
    features,
    head: str,
    spec: TrainSpec,
    classes: Sequence[str] | None = None,
    weight_report_epochs: Sequence[int] = (),
    segments=None,
) -> tuple[Mlp, TrainHistory]:
    """Mini-batch Adam over seeded per-epoch shuffles of the training split.

    When a validation split exists, the returned parameters are those of the
    epoch with the best validation micro-F1; otherwise the final epoch's.
    Weight-group reports are captured from the first layer at the requested
    epochs (requires segments from a concat fusion).
    """
    if not data.train:
        raise EmptyTrainSet("training split is empty")
    classes = list(classes) if classes is not None else list(data.classes)
    X = _feature_matrix(data.train, features)
    y = _targets(data.train, classes, head)
    model = init_mlp(X.shape[1], spec.hidden, classes, head, spec.seed)
    opt = Adam(model.params(), spec)

    has_val = len(data.validation) > 0
    if has_val:
        Xv = _feature_matrix(data.validation, features)
        gold_v = [labels for _, labels in data.validation]

    history = TrainHistory()
    best_score = -1.0
    best_params = None
    stale = 0
    n = X.shape[0]
    for epoch in range(1, spec.epochs + 1):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([spec.seed & _MASK64, 0xBA7C4, epoch]))
        )
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, spec.batch_size):
            idx = order[lo : lo + spec.batch_size]
            loss, grads = batch_loss_and_grads(model, X[idx], y[idx])
            opt.step(model.params(), grads)
            epoch_loss += loss
            n_batches += 1
        if not all(np.isfinite(p).all() for p in model.params()):
            raise NonFiniteUpdate(f"non-finite classifier parameter after epoch {epoch}")
        history.epoch_losses.append(epoch_loss / max(n_batches, 1))
        if epoch in weight_report_epochs and segments is not None:
            history.weight_reports.append(weight_group_analysis(model, segments, epoch))
        if has_val:
            preds_v = predict_batch(model, Xv)
            score = micro_f1(list(zip(preds_v, gold_v)), classes)
            history.val_micro_f1.append(score)
            if score > best_score:
                best_score = score
                best_params = model.copy_params()
                history.best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if spec.early_stop_patience is not None and stale >= spec.early_stop_patience:
                    break
        else:
            history.best_epoch = epoch
    if has_val and best_params is not None:
        model.set_params(best_params)
    return model, history


def project_labels(
    examples: Iterable[tuple[str, frozenset[str]]], hierarchy: TypeHierarchy, lvl: int
) -> list[tuple[str, frozenset[str]]]:
    """Ancestor-project labels to a level; entities whose labels are all
    shallower than the level are dropped."""
    out = []
    for iri, labels in examples:
        projected = frozenset(
            a for a in (hierarchy.ancestor_at(c, lvl) for c in labels) if a is not None
        )
        if projected:
            out.append((iri, projected))
    return out


def train_lpl(
    data: LabeledDataset,
    features,
    hierarchy: TypeHierarchy,
    spec: TrainSpec,
    head: str = "softmax",
) -> tuple[list[Mlp], list[TrainHistory]]:
    """One independent flat classifier per hierarchy level (1..max_level)."""
    for _, labels in data.train + data.validation + data.test:
        for c in labels:
            if c not in hierarchy:
                raise InconsistentHierarchy(f"label {c} missing from hierarchy")
    models = []
    histories = []
    for lvl in range(1, hierarchy.max_level + 1):
        level_data = LabeledDataset(
            project_labels(data.train, hierarchy, lvl),
            project_labels(data.validation, hierarchy, lvl),
            project_labels(data.test, hierarchy, lvl),
            hierarchy.classes_at_level(lvl),
        )
        if not level_data.train:
            raise EmptyTrainSet(f"no training example reaches hierarchy level {lvl}")
        level_spec = TrainSpec(
            batch_size=spec.batch_size,
            epochs=spec.epochs,
            lr=spec.lr,
            beta1=spec.beta1,
            beta2=spec.beta2,
            eps=spec.eps,
            seed=(spec.seed + 7919 * lvl) & _MASK64,
            early_stop_patience=spec.early_stop_patience,
            hidden=spec.hidden,
        )
        model, hist = train_classifier(level_data, features, head, level_spec)
        models.append(model)
        histories.append(hist)
    return models, histories


def predict_hierarchical(models: Sequence[Mlp], hierarchy: TypeHierarchy, x: np.ndarray) -> list[str]:
    """Predict level by level; stop at the first level whose predicted class
    is not a child of the previously accepted class.  The returned path is
    always a root-anchored ancestor chain (never empty)."""
    path: list[str] = []
    prev: str | None = None
    for m in models:
        logits = forward(m, x)
        cls = m.classes[int(np.argmax(logits))]
        if path and hierarchy.parent.get(cls) != prev:
            break
        path.append(cls)
        prev = cls
    return path


def save_model(m: Mlp, path: str, hierarchy_hash: str | None = None) -> None:
    """JSON header line (dims, head, classes, optional hierarchy hash)
    followed by the raw little-endian float64 parameter blob."""
    header = {
        "input_dim": m.input_dim,
        "hidden": [int(m.W1.shape[1]), int(m.W2.shape[1])],
        "n_classes": len(m.classes),
        "head": m.head,
        "classes": m.classes,
        "hierarchy_hash": hierarchy_hash,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        blob = np.concatenate([p.ravel() for p in m.params()]).astype("<f8")
        f.write(blob.tobytes())


def load_model(path: str) -> Mlp:
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("utf-8"))
        blob = np.frombuffer(f.read(), dtype="<f8")
    d, (h1, h2), k = header["input_dim"], header["hidden"], header["n_classes"]
    shapes = [(d, h1), (h1,), (h1, h2), (h2,), (h2, k), (k,)]
    params = []
    pos = 0
    for shape in shapes:
        size = int(np.prod(shape))
        params.append(blob[pos : pos + size].reshape(shape).copy())
        pos += size
    if pos != blob.size:
        raise DimMismatch(f"{path}: parameter blob has {blob.size} values, expected {pos}")
    return Mlp(*params, head=header["head"], classes=list(header["classes"]))
