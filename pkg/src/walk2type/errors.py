"""Exception types shared across the package."""


class Walk2TypeError(Exception):
    """Base class for all package-specific errors."""


class MalformedLine(Walk2TypeError):
    """An N-Triples line that is neither blank, comment, nor a parseable statement."""

    def __init__(self, line_no: int, text: str = ""):
        super().__init__(f"malformed N-Triples statement at line {line_no}: {text!r}")
        self.line_no = line_no
        self.text = text


class UnknownEntity(Walk2TypeError):
    """Entity id or IRI not present in the graph."""


class TokenNotInGraph(Walk2TypeError):
    """Corpus token cannot be resolved against the given graph."""


class NotClassicWalk(Walk2TypeError):
    """Walk does not alternate entity, relation, entity, ... starting and ending with an entity."""


class EmptyCorpus(Walk2TypeError):
    """No usable sentences (or no token survived the frequency floor)."""


class NonFiniteUpdate(Walk2TypeError):
    """A trained parameter became NaN or infinite."""


class FormatError(Walk2TypeError):
    """Persisted file does not match its declared format."""


class DimMismatch(Walk2TypeError):
    """Vector or matrix dimensionality differs from what the operation requires."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no


class DegenerateInput(Walk2TypeError):
    """Fewer than two distinct vectors supplied to a PCA fit."""


class MissingFeature(Walk2TypeError):
    """A training entity has no feature vector."""


class EmptyTrainSet(Walk2TypeError):
    """No training examples after filtering."""


class InconsistentHierarchy(Walk2TypeError):
    """A label's ancestor chain is broken or violates the level structure."""


class CyclicHierarchy(Walk2TypeError):
    """Parent links contain a cycle."""


class UnknownClass(Walk2TypeError):
    """A label references a class absent from the hierarchy."""

    def __init__(self, iri: str, cls: str):
        super().__init__(f"entity {iri} labeled with class {cls} not present in the hierarchy")
        self.iri = iri
        self.cls = cls


class OverlapSplit(Walk2TypeError):
    """Train/test/validation splits share at least one entity."""


class UnsupportedConfig(Walk2TypeError):
    """Configuration combination the trainer does not define."""


class StageError(Walk2TypeError):
    """Pipeline stage failure, carrying the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
