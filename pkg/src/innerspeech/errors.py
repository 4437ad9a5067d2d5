"""Shared exception types, aligned with the CLI exit-code taxonomy."""


class ValidationError(ValueError):
    """Input data or parameters violate a documented contract (CLI exit 2)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a usable result (CLI exit 3)."""


class UsageError(Exception):
    """Bad command line or config file (CLI exit 1)."""
