"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class TorusRGGError(Exception):
    """Base class for package errors."""


class ValidationError(TorusRGGError, ValueError):
    """Inputs violate a documented precondition (CLI exit code 1)."""


class UnsupportedGeometryError(ValidationError):
    """The requested computation is only available for the L-infinity model."""


class InternalConsistencyError(TorusRGGError, RuntimeError):
    """Two independent routes to the same quantity disagree (CLI exit code 2)."""
