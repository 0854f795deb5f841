"""Exception types shared across the package.

Every error raised on a contract violation derives from ScanlocError so
callers can catch the whole family, while the subclasses keep the failure
kinds distinguishable (bad arguments, unreadable inputs, degenerate scales,
impossible poses, oracle guards).
"""


class ScanlocError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(ScanlocError, ValueError):
    """An argument violates an operation's precondition."""


class InputFormatError(ScanlocError, ValueError):
    """A file or buffer does not parse as the expected format."""


class DegenerateScaleError(InvalidArgumentError):
    """A scale factor would collapse a grid below one cell."""


class InvalidPoseError(InvalidArgumentError):
    """A pose is unusable, e.g. a sensor placed inside a building."""


class OracleGuardError(InvalidArgumentError):
    """A reference (brute-force) routine was given an oversize input."""
