"""Exception types raised across the package."""


class BoltzlensError(Exception):
    """Base class for domain errors."""


class DimensionError(BoltzlensError, ValueError):
    """Shape mismatch between an input and the parameters consuming it.

    ``axis`` names the offending axis (e.g. ``"channels"``, ``"height"``).
    """

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class StaleTraceError(DimensionError):
    """A trace does not belong to the network it is used with."""


class FormatError(BoltzlensError, ValueError):
    """A binary file does not match its expected wire format."""


class DatasetError(BoltzlensError):
    """Requested dataset cannot be produced from the given sources."""
