"""N-Triples ingestion and an interned, index-addressed knowledge graph.

The graph is immutable after construction and stores outgoing adjacency in
CSR form (one offsets array plus flat relation/target arrays), so walk
generation can enumerate a vertex's out-edges as a constant-time slice.
Entity and relation ids live in disjoint namespaces: an integer id is
meaningless without knowing which kind it refers to.
"""

from __future__ import annotations

import gzip
import json
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple

import numpy as np

from .errors import MalformedLine, UnknownEntity

_IRI = r"<([^\x00-\x20<>\"{}|^`\\]+)>"
_BNODE = r"_:[A-Za-z0-9](?:[A-Za-z0-9._\-]*[A-Za-z0-9])?"
_LITERAL = r'"(?:[^"\\]|\\.)*"(?:\^\^<[^\x00-\x20<>"{}|^`\\]+>|@[A-Za-z]+(?:-[A-Za-z0-9]+)*)?'

# groups: 1 subject iri, 2 subject bnode, 3 predicate iri,
#         4 object iri, 5 object bnode, 6 object literal
_STATEMENT = re.compile(
    rf"^(?:{_IRI}|({_BNODE}))[ \t]+{_IRI}[ \t]+(?:{_IRI}|({_BNODE})|({_LITERAL}))[ \t]*\.[ \t]*$"
)


class Triple(NamedTuple):
    subject: str
    predicate: str
    object: str


@dataclass
class ParseReport:
    """Per-stream parse accounting, serializable as stable-key JSON."""

    lines: int = 0
    triples: int = 0
    literals_skipped: int = 0
    malformed: int = 0
    blank_nodes_skipped: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "lines": self.lines,
                "triples": self.triples,
                "literals_skipped": self.literals_skipped,
                "malformed": self.malformed,
                "blank_nodes_skipped": self.blank_nodes_skipped,
            },
            sort_keys=True,
        )


def parse_ntriples(stream: IO, strict: bool = False) -> tuple[list[Triple], ParseReport]:
    """Parse one-statement-per-line N-Triples into IRI-only triples.

    Lines with a literal object are dropped and counted (walks traverse only
    entity-to-entity edges; descriptions arrive through a separate file).
    Blank-node statements are skipped with a count in lenient mode and raise
    in strict mode.  Anything else unparseable counts as malformed; with
    ``strict=True`` the first such line raises ``MalformedLine``.
    """
    if isinstance(stream, (bytes, str)):
        raise TypeError("parse_ntriples expects a file-like stream")
    raw = stream.read()
    if isinstance(raw, bytes):
        text = raw.decode("utf-8")
    else:
        text = raw

    triples: list[Triple] = []
    report = ParseReport()
    for line_no, line in enumerate(text.splitlines(), start=1):
        report.lines += 1
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _STATEMENT.match(line)
        if m is None:
            report.malformed += 1
            if strict:
                raise MalformedLine(line_no, line)
            continue
        subj_iri, subj_bnode, pred, obj_iri, obj_bnode, obj_lit = m.groups()
        if subj_bnode is not None or obj_bnode is not None:
            report.blank_nodes_skipped += 1
            if strict:
                raise MalformedLine(line_no, line)
            continue
        if obj_lit is not None:
            report.literals_skipped += 1
            continue
        triples.append(Triple(subj_iri, pred, obj_iri))
        report.triples += 1
    return triples, report


def open_ntriples(path: str) -> IO[bytes]:
    """Open an N-Triples file, transparently decompressing gzip (by magic bytes)."""
    f = open(path, "rb")
    magic = f.read(2)
    f.seek(0)
    if magic == b"\x1f\x8b":
        return gzip.open(f, "rb")
    return f


@dataclass
class KnowledgeGraph:
    """Interned directed labeled multigraph with CSR outgoing adjacency.

    Entity and relation IRIs are assigned dense ids by lexicographic order,
    so a graph is a canonical function of its triple set.  Instances are
    immutable once built and safe to share across walk workers.
    """

    entities: list[str]
    relations: list[str]
    out_offsets: np.ndarray  # int64, len n_entities + 1
    out_rel: np.ndarray  # int32, len n_edges
    out_dst: np.ndarray  # int32, len n_edges
    _ent_index: dict[str, int] = field(repr=False, default_factory=dict)
    _rel_index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self._ent_index:
            self._ent_index = {iri: i for i, iri in enumerate(self.entities)}
        if not self._rel_index:
            self._rel_index = {iri: i for i, iri in enumerate(self.relations)}

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_edges(self) -> int:
        return int(self.out_rel.shape[0])

    def entity_id(self, iri: str) -> int:
        try:
            return self._ent_index[iri]
        except KeyError:
            raise UnknownEntity(f"unknown entity IRI: {iri}") from None

    def relation_id(self, iri: str) -> int:
        try:
            return self._rel_index[iri]
        except KeyError:
            raise UnknownEntity(f"unknown relation IRI: {iri}") from None

    def entity_iri(self, eid: int) -> str:
        if not 0 <= eid < len(self.entities):
            raise UnknownEntity(f"entity id {eid} out of range")
        return self.entities[eid]

    def relation_iri(self, rid: int) -> str:
        if not 0 <= rid < len(self.relations):
            raise UnknownEntity(f"relation id {rid} out of range")
        return self.relations[rid]

    def has_entity(self, iri: str) -> bool:
        return iri in self._ent_index

    def has_relation(self, iri: str) -> bool:
        return iri in self._rel_index

    def out_degree(self, eid: int) -> int:
        self._check_eid(eid)
        return int(self.out_offsets[eid + 1] - self.out_offsets[eid])

    def out_neighbors(self, eid: int) -> list[tuple[int, int]]:
        """Sorted (relation id, target id) pairs leaving ``eid``; empty for sinks."""
        self._check_eid(eid)
        lo, hi = int(self.out_offsets[eid]), int(self.out_offsets[eid + 1])
        return list(zip(self.out_rel[lo:hi].tolist(), self.out_dst[lo:hi].tolist()))

    def _check_eid(self, eid: int) -> None:
        if not 0 <= eid < self.n_entities:
            raise UnknownEntity(f"entity id {eid} out of range")

    def triples(self) -> Iterable[Triple]:
        for eid in range(self.n_entities):
            s = self.entities[eid]
            lo, hi = int(self.out_offsets[eid]), int(self.out_offsets[eid + 1])
            for k in range(lo, hi):
                yield Triple(s, self.relations[self.out_rel[k]], self.entities[self.out_dst[k]])

    def to_ntriples(self, sink: IO[str]) -> int:
        n = 0
        for t in self.triples():
            sink.write(f"<{t.subject}> <{t.predicate}> <{t.object}> .\n")
            n += 1
        return n


def build_graph(triples: Iterable[Triple], exclude_predicates: Iterable[str] = ()) -> KnowledgeGraph:
    """Intern IRIs and build CSR adjacency; duplicate triples collapse to one edge."""
    excluded = set(exclude_predicates)
    uniq = {t for t in triples if t.predicate not in excluded}

    ent_iris = sorted({t.subject for t in uniq} | {t.object for t in uniq})
    rel_iris = sorted({t.predicate for t in uniq})
    ent_index = {iri: i for i, iri in enumerate(ent_iris)}
    rel_index = {iri: i for i, iri in enumerate(rel_iris)}

    edges = sorted(
        (ent_index[t.subject], rel_index[t.predicate], ent_index[t.object]) for t in uniq
    )
    n = len(ent_iris)
    offsets = np.zeros(n + 1, dtype=np.int64)
    rel = np.empty(len(edges), dtype=np.int32)
    dst = np.empty(len(edges), dtype=np.int32)
    for k, (s, p, o) in enumerate(edges):
        offsets[s + 1] += 1
        rel[k] = p
        dst[k] = o
    np.cumsum(offsets, out=offsets)
    return KnowledgeGraph(ent_iris, rel_iris, offsets, rel, dst, ent_index, rel_index)


def load_graph(
    path: str, strict: bool = False, exclude_predicates: Iterable[str] = ()
) -> tuple[KnowledgeGraph, ParseReport]:
    with open_ntriples(path) as f:
        triples, report = parse_ntriples(f, strict=strict)
    return build_graph(triples, exclude_predicates=exclude_predicates), report
