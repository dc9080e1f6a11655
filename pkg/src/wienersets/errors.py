"""Exception types shared across the package."""


class WienerSetsError(Exception):
    """Base class for all package errors."""


class CapacityError(WienerSetsError):
    """A requested grid or enumeration exceeds the memory guard."""


class DomainError(WienerSetsError, ValueError):
    """An argument lies outside the domain of an operation."""


class UsageError(WienerSetsError, ValueError):
    """An operation was called with an unsupported combination of options."""
