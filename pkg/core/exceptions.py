#!/usr/bin/env python3
"""
Exception hierarchy for the FOSI optimizer lab
Library code raises these; the experiment harness turns them into run statuses
"""


class FosiError(Exception):
    """Base class for all errors raised by this package"""


class InvalidArgumentsError(FosiError, ValueError):
    """Raised when an operation's preconditions are violated"""


class NonFiniteError(FosiError, ValueError):
    """Raised when a NaN or infinity shows up in an input or intermediate vector"""

    def __init__(self, message: str, where: str = ""):
        super().__init__(message)
        self.where = where


class LanczosError(FosiError):
    """Raised when the Lanczos iteration cannot produce a usable factorization"""


class InsufficientKrylovDimensionError(LanczosError):
    """Raised when Lanczos broke down before reaching k + l basis vectors"""


class ConvergenceError(FosiError):
    """Raised when an iterative eigensolver does not converge"""


class OverheadTargetError(InvalidArgumentsError):
    """Raised when the requested runtime overhead cannot be met"""


class DatasetFormatError(FosiError, ValueError):
    """Raised for malformed dataset files"""

    def __init__(self, message: str, line_number: int = 0):
        super().__init__(message)
        self.line_number = line_number


class TraceFileError(FosiError):
    """Raised when a run trace file cannot be read or holds no rows"""
