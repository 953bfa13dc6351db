"""Exception types.

Two roots matter to callers: :class:`ConfigError` for bad parameters or
missing inputs (CLI exit code 2) and :class:`DataError` for inputs whose
content violates a contract (CLI exit code 3).
"""


class SparseVPRError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SparseVPRError, ValueError):
    pass


class DataError(SparseVPRError, ValueError):
    pass


class MalformedRecord(DataError):
    pass


class UnsortedInput(DataError):
    pass


class OutOfBounds(DataError):
    pass


class EmptyStream(DataError):
    pass


class TooFewFrames(DataError):
    pass


class DegenerateVariance(DataError):
    pass


class MassExhausted(DataError):
    pass


class LengthMismatch(DataError):
    pass


class GeometryMismatch(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class TrackCoverageGap(DataError):
    pass


class BadSequenceLength(ConfigError):
    pass
