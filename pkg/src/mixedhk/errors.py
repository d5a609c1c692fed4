"""Exception types."""


class ConfigurationError(ValueError):
    """Invalid model input: bad shapes, out-of-range values, malformed schedules.

    ``path`` names the offending scenario field when the error comes from
    loading a scenario file.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class UsageError(RuntimeError):
    """An operation was called on an object it does not apply to."""


class HypothesisViolation(ValueError):
    """Parameters violate the assumptions a bound formula needs (gamma >= 1, p = 0)."""
