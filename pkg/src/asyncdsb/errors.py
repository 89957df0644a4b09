"""Exception hierarchy shared by all asyncdsb modules."""


class AsyncDSBError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(AsyncDSBError):
    """A configuration object violates its invariants."""


class ValidationError(AsyncDSBError):
    """Runtime inputs are inconsistent (shapes, ranges, ordering)."""


class SingularityError(AsyncDSBError):
    """An operation was requested at a time where its variance vanishes."""
