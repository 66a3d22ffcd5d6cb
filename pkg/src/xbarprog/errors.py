"""Exception types shared across the package."""


class CrossbarError(Exception):
    """Base class for all package errors."""


class ValidationError(CrossbarError):
    """Inputs violate a documented precondition or invariant."""


class FormatError(CrossbarError):
    """A file is not a valid CBWT/manifest artifact (bad magic, bad header)."""


class TruncatedFileError(FormatError):
    """A CBWT file ends before the payload declared in its header."""


class CapacityError(ValidationError):
    """More weights than the crossbar geometry can hold."""


class UnsupportedWidthError(ValidationError):
    """Requested bit width outside the supported range."""
