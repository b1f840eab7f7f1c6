"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration-type errors exit 2,
numeric/recovery-type errors exit 3.
"""


class NmfBanditError(Exception):
    """Base class for all package errors."""


class DimensionError(NmfBanditError, ValueError):
    """Shapes or index ranges are inconsistent with the operation."""


class ParameterError(NmfBanditError, ValueError):
    """A supplied parameter or configuration value is invalid."""


class ParseError(ParameterError):
    """A data file could not be parsed; carries the offending location."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class CapabilityError(ParameterError):
    """The request needs information this instance does not carry."""


class NumericError(NmfBanditError, RuntimeError):
    """A numerical routine failed to produce a usable result."""


class SingularityError(NumericError):
    """A matrix required to have full column rank does not."""

    def __init__(self, message, sigma_min=None, block=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.block = block


class RecoveryError(NumericError):
    """Anchor/factor recovery failed (e.g. the tolerance is too small)."""
