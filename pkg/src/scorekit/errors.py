"""Exception types shared across the package."""


class ScorekitError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ScorekitError):
    """Malformed, missing, or out-of-contract input data."""


class NumericError(ScorekitError):
    """A solver or numerical routine failed (separation, singularity, ...)."""
