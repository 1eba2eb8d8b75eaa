"""Exception hierarchy shared by every pipeline stage.

``FormatError`` subclasses signal unreadable or corrupt on-disk artifacts;
``ValidationError`` subclasses signal inputs that parse but violate a domain
invariant. The CLI maps the former to exit code 2 and the latter to exit
code 1.
"""


class ProtoPointError(Exception):
    """Base class for every error raised by this package."""


class FormatError(ProtoPointError):
    """An on-disk artifact could not be decoded."""


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class ValidationError(ProtoPointError):
    """A value violates one of its type invariants."""


class DimMismatch(ValidationError):
    """Array contents disagree with declared dimensions or invariants."""


class NonBinaryMask(ValidationError):
    pass


class ZeroVector(ValidationError):
    """A patch vector has (near-)zero norm and cannot be normalized."""

    def __init__(self, index: int):
        super().__init__(f"patch vector at flat index {index} has near-zero norm")
        self.index = index


class EmptyMask(ValidationError):
    pass


class UnnormalizedGrid(ValidationError):
    pass


class SingleReference(ValidationError):
    """Multi-reference distillation was invoked with a single source image."""


class TooFewVectors(ValidationError):
    pass


class EmptyScoreSet(ValidationError):
    pass


class EmptyBank(ValidationError):
    pass


class EmptyComponent(ValidationError):
    pass


class EmptyName(ValidationError):
    pass


class InvalidThreshold(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class FixtureError(ValidationError):
    pass
