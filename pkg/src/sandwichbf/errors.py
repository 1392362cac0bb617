"""Exception types shared across the package."""

from __future__ import annotations


class SandwichError(Exception):
    """Base class for package errors."""


class FormatError(SandwichError, ValueError):
    """A serialized blob could not be decoded.

    ``code`` names the failure: ``bad_magic``, ``unknown_version``,
    ``truncated``, ``checksum_mismatch`` or ``trailing_bytes``.
    """

    code = "format"

    def __init__(self, message: str = "") -> None:
        super().__init__(message or self.code.replace("_", " "))


class BadMagic(FormatError):
    code = "bad_magic"


class UnknownVersion(FormatError):
    code = "unknown_version"


class Truncated(FormatError):
    code = "truncated"


class ChecksumMismatch(FormatError):
    code = "checksum_mismatch"


class TrailingBytes(FormatError):
    code = "trailing_bytes"


class MPHFConstructionError(SandwichError):
    """Perfect-hash construction did not converge within the retry bound."""


class ContractViolation(SandwichError):
    """A structure answered "no" for one of its own keys."""


class ConfigError(SandwichError, ValueError):
    """Invalid experiment configuration."""
