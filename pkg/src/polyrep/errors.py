"""Exception hierarchy shared by the whole package.

Exit codes used by the command line tool ride along on the classes so that
library failures map onto process status without a lookup table.
"""
from __future__ import annotations

__all__ = [
    "PolyrepError",
    "VerificationError",
    "InvalidInputError",
    "SizeLimitError",
]


class PolyrepError(Exception):
    """Base class for everything raised deliberately by this package."""

    exit_code = 1


class VerificationError(PolyrepError):
    """A numerical or combinatorial check failed beyond its tolerance.

    Carries an optional ``certificate`` payload describing the failure in
    enough detail to reproduce it (violating elements, residuals, ...).
    """

    exit_code = 2

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class InvalidInputError(PolyrepError):
    """Caller handed us data outside the documented domain."""

    exit_code = 3


class SizeLimitError(PolyrepError):
    """A configured resource cap would be exceeded; nothing was truncated."""

    exit_code = 4
