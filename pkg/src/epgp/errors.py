"""Exception taxonomy shared across the package.

Callers can distinguish bad inputs (:class:`InvalidArgumentError`),
inconsistent run setups (:class:`ConfigurationError`) and linear-algebra
breakdowns (:class:`NumericalError`).  The command line maps these onto
distinct exit codes.
"""

from __future__ import annotations


class EpgpError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(EpgpError, ValueError):
    """A function argument violates its documented precondition."""


class ConfigurationError(EpgpError):
    """A run setup is internally inconsistent (bad mode, mismatched files)."""


class CheckpointError(ConfigurationError):
    """A checkpoint file is unreadable, corrupt or has the wrong version."""


class NumericalError(EpgpError, RuntimeError):
    """A numerical operation failed (non-finite loss, Cholesky breakdown)."""

    def __init__(self, message: str, *, minor_index: int | None = None):
        super().__init__(message)
        # 1-based index of the offending leading minor when a Cholesky
        # factorization fails; None for other numerical failures.
        self.minor_index = minor_index
