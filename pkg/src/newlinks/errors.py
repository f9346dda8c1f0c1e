"""Exception hierarchy shared by all modules."""


class NewLinksError(Exception):
    """Base class for every error raised by this package."""


class MalformedInputError(NewLinksError, ValueError):
    """An input record or URL could not be parsed."""


class MissingDataError(NewLinksError, ValueError):
    """A required value is absent."""


class InvalidArgumentError(NewLinksError, ValueError):
    """An argument violates the operation's preconditions."""


class EmptySeriesError(NewLinksError):
    """Ingestion left no page with a complete timeline."""


class DegenerateVectorError(NewLinksError, ValueError):
    """A vector cannot be normalized (zero norm)."""


class DegenerateCorpusError(NewLinksError, ValueError):
    """A text corpus carries no usable term weight."""


class SchemaError(NewLinksError):
    """Feature registry of the data does not match the fitted model."""


class ConvergenceError(NewLinksError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
