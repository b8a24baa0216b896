"""Exception types raised across the package."""


class StegoError(Exception):
    """Base class for all package errors."""


class DistributionError(StegoError, ValueError):
    """A mass vector is not a valid probability distribution."""


class DimensionError(StegoError, ValueError):
    """Lengths or support sizes do not match."""


class RangeError(StegoError, ValueError):
    """A map produced a value outside its declared output range."""


class ChannelError(StegoError, ValueError):
    """Malformed channel description or min-entropy violation."""


class EnumerationTooLarge(StegoError):
    """Exact enumeration would exceed the configured cap."""


class ParameterError(StegoError, ValueError):
    """Inconsistent or impossible parameter choice."""


class PreconditionError(StegoError, ValueError):
    """An operation's input does not satisfy its stated precondition."""


class FormatError(StegoError, ValueError):
    """A key, stegotext, or session document is malformed or the wrong size."""
