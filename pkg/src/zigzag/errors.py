"""Exception types shared across the package."""


class ZigzagError(Exception):
    """Base class for all package errors."""


class GridError(ZigzagError):
    """Invalid grid geometry."""


class MemoryCapError(ZigzagError):
    """A requested field or record would exceed the configured memory cap."""


class RecordWindowError(ZigzagError):
    """A trajectory was requested outside the time window covered by a record."""


class NumericalError(ZigzagError):
    """Non-finite data encountered where finite values are required."""


class PositivityError(ZigzagError):
    """An equilibrium density required to be positive is not."""


class ConfigError(ZigzagError):
    """A scenario configuration violates the documented schema."""
