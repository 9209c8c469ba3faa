"""Exception hierarchy shared across the package."""


class SocmapError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SocmapError):
    """Invalid run configuration, model spec, or covariate schema."""


class DataError(SocmapError):
    """Malformed or inconsistent input data."""


class CoverageError(DataError):
    """Horizon records do not tile the requested depth interval."""


class NumericError(SocmapError):
    """A numerical procedure failed (singular system, covariance not PD)."""


class FitError(NumericError):
    """Model fitting failed on every attempted start.

    Carries the best partial result in ``diagnostics`` when available.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class ValidityError(SocmapError):
    """Spatial-model validity could not be established by Winsorizing.

    Carries the search diagnostics so a cross-validation harness can record
    the repetition as failed and continue.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
