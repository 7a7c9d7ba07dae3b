class QKDError(Exception):
    """Base class for every error raised by the backend."""


class UsageError(QKDError):
    """Bad input from a caller: maps to exit status 1 / HTTP 400."""


class InvariantViolation(QKDError):
    """An internal consistency check failed: exit status 2 / HTTP 500."""


class ConfigurationError(UsageError):
    pass


class InvalidStateError(UsageError):
    pass


class DimensionMismatchError(UsageError):
    pass


class InvalidQubitError(UsageError):
    pass


class MalformedObservableError(UsageError):
    pass


class PostSelectionError(UsageError):
    """The ABL denominator vanishes: the post-selection cannot occur."""


class RetrodictionError(InvariantViolation):
    """A retrodiction cell has no certain value."""


class UnknownRoundError(UsageError):
    pass


class SiftingError(UsageError):
    pass


class EmptySubsequenceError(UsageError):
    """Conditioning on an event of probability zero."""


class CircuitShapeError(UsageError):
    pass


class CircuitParseError(UsageError):
    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")
