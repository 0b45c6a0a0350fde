"""Exception types raised across the toolkit."""


class KZError(Exception):
    """Base class for all toolkit errors."""


class InvalidGeometryError(KZError, ValueError):
    pass


class CapacityError(KZError, MemoryError):
    """Requested basis does not fit the bitmask word or address space."""


class NotInBasisError(KZError, KeyError):
    pass


class InvalidProtocolError(KZError, ValueError):
    pass


class IntegrationError(KZError, RuntimeError):
    """Time stepping failed; ``diagnostics`` holds the state of the stepper."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DegenerateFitError(KZError, ValueError):
    """Too few usable points for a regression, or non-positive values in log space."""

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)


class EigensolverError(KZError, RuntimeError):
    pass


class InvalidGridError(KZError, ValueError):
    pass


class ConfigError(KZError, ValueError):
    """Malformed configuration or input file. ``field`` / ``line`` locate the problem."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
