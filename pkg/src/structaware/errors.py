"""Exception types shared across the package."""


class StructAwareError(Exception):
    """Base class for domain errors (mapped to exit code 1 by the CLI)."""


class ParseError(StructAwareError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedLanguage(StructAwareError):
    pass


class AlignmentError(StructAwareError):
    pass


class DimensionMismatch(StructAwareError, ValueError):
    pass


class ShapeMismatch(StructAwareError, ValueError):
    pass


class NotConverged(StructAwareError):
    """Raised only on request; solvers report non-convergence through a flag."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TooLarge(StructAwareError, ValueError):
    pass


class EmptyHeads(StructAwareError, ValueError):
    pass


class EmptyReference(StructAwareError, ValueError):
    pass


class SequenceTooLong(StructAwareError, ValueError):
    pass
