"""Exception hierarchy shared by all modules."""


class DataHidingError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimensionError(DataHidingError, ValueError):
    pass


class DimensionMismatchError(DataHidingError, ValueError):
    pass


class NotAStateError(DataHidingError, ValueError):
    """Matrix fails the Hermitian / trace-one / positivity checks."""


class InvalidParameterError(DataHidingError, ValueError):
    pass


class ChannelFormatError(DataHidingError, ValueError):
    """Malformed channel description (file or named constructor)."""


class ResourceGuardError(DataHidingError):
    """Requested workspace exceeds the desk-scale limits."""
