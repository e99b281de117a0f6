"""Exception hierarchy shared by every module.

`ValidationError` subclasses signal bad input or configuration (CLI exit 1);
anything else raised from a run is treated as a runtime failure (CLI exit 2).
"""


class IdofewError(Exception):
    pass


class ValidationError(IdofewError, ValueError):
    pass


class MalformedRecord(ValidationError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        msg = f"malformed record on line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class DuplicateId(ValidationError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"duplicate document id {doc_id!r}")


class EmptyCorpus(ValidationError):
    def __init__(self, what: str = "corpus"):
        super().__init__(f"{what} is empty")


class NotEnoughLabels(ValidationError):
    def __init__(self, available: int, requested: int):
        self.available = available
        self.requested = requested
        super().__init__(f"requested {requested} labeled documents, only {available} available")


class TooFewDocuments(ValidationError):
    def __init__(self, n_docs: int, k: int):
        self.n_docs = n_docs
        self.k = k
        super().__init__(f"cannot form {k} clusters from {n_docs} documents")


class TooFewPoints(TooFewDocuments):
    pass


class InvalidDistribution(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class MissingEmbedding(ValidationError, KeyError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        ValidationError.__init__(self, f"no embedding for document {doc_id!r}")

    def __str__(self) -> str:
        return self.args[0]


class LabelOutOfRange(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class StageError(IdofewError):
    """Wraps a failure inside a pipeline stage with the stage's tag."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
