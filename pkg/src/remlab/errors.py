"""Exception types shared across the package."""


class RemlabError(Exception):
    """Base class of every error raised deliberately by this package."""


class DomainError(RemlabError, ValueError):
    """An argument lies outside the domain of the operation."""


class CapacityError(RemlabError, RuntimeError):
    """The request exceeds what an exhaustive or dense computation can hold."""


class PrecisionError(RemlabError, ArithmeticError):
    """A quantity cannot be represented or resolved in double precision."""


class InvalidRegimeError(RemlabError, ValueError):
    """Scale parameters fall outside the regime where the sets are defined."""


class ResourceError(RemlabError, RuntimeError):
    """An event budget was exhausted; ``partial`` carries what was computed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
