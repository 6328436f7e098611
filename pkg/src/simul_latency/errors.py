"""Exception hierarchy shared by the trace model, metrics and CLI."""


class LatencyError(Exception):
    """Base class for every error raised by this package."""


class TraceError(LatencyError, ValueError):
    """A session trace is malformed."""


class EmptyTrace(TraceError):
    pass


class NonMonotonicTimestamps(TraceError):
    pass


class MixedUnits(TraceError):
    pass


class MissingTimestamps(TraceError):
    pass


class NonPositiveSegmentLength(LatencyError, ValueError):
    pass


class MetricError(LatencyError, ValueError):
    """A metric is undefined for the given session."""


class EmptySide(MetricError):
    pass


class EmptyOutput(EmptySide):
    pass


class MissingReference(MetricError):
    pass


class DivisionByZero(MetricError, ZeroDivisionError):
    pass


class EmptyCorpus(LatencyError, ValueError):
    pass


class InvalidK(LatencyError, ValueError):
    pass


class InvalidLengths(LatencyError, ValueError):
    pass


class InvalidRange(LatencyError, ValueError):
    pass


class ParseError(LatencyError, ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class IdNotFound(LatencyError, KeyError):
    pass
