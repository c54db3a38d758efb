"""Shared exception types."""


class UnsupportedError(ValueError):
    """Operation is not defined for this environment or action space."""


class CompatibilityError(ValueError):
    """A prior artifact does not match the target observation/action space."""
