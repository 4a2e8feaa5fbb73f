"""Exception hierarchy shared by all memloop modules."""


class MemloopError(Exception):
    """Base class for every error raised by memloop."""


class InvalidSpecError(MemloopError, ValueError):
    pass


class CorruptStateError(MemloopError):
    pass


class InsufficientDataError(MemloopError):
    pass


class NotSegmentableError(MemloopError):
    """Trace does not contain one positive and one negative voltage excursion."""


class DegenerateFitError(MemloopError):
    pass


class UndefinedCorrelationError(MemloopError):
    pass


class TraceParseError(MemloopError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidTraceError(MemloopError, ValueError):
    pass
