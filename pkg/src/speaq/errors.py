"""Exception types raised across the package."""


class SpeaQError(Exception):
    """Base class for all errors raised by this package."""


class InfeasibleError(SpeaQError):
    """No bijection avoids every forbidden entry of a cost matrix."""


class SizeExceededError(SpeaQError):
    """Brute-force enumeration requested for a matrix that is too large."""


class EmptyGroupError(SpeaQError):
    """The frequency distribution cannot populate the requested number of groups."""


class UnknownIdError(SpeaQError, KeyError):
    """A predicate id or query index lies outside every group."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownClassError(SpeaQError, IndexError):
    """A class id is out of range for the given probability vector."""


class LengthMismatchError(SpeaQError, ValueError):
    pass


class NullGtError(SpeaQError, ValueError):
    """Quality vectors were requested for a no-relation placeholder."""


class CapacityExceededError(SpeaQError):
    """More ground truths than queries in a capacity domain."""


class ParseError(SpeaQError, ValueError):
    """A file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message: str, *, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ConfigError(SpeaQError, ValueError):
    pass
