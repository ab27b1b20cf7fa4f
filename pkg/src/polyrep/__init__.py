"""Right-angled polygon-of-groups representations in hyperbolic space.

The package builds, verifies, and measures orthogonal representations of
cyclic graph products of finite groups acting on hyperbolic space, together
with the combinatorial machinery (balls, trees, separation checks) needed
to certify them.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    InvalidInputError,
    PolyrepError,
    SizeLimitError,
    VerificationError,
)

__all__ = [
    "__version__",
    "PolyrepError",
    "VerificationError",
    "InvalidInputError",
    "SizeLimitError",
]
