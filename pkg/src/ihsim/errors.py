"""Exception types shared across the simulator."""


class ValidationError(ValueError):
    """Invalid configuration or argument; ``fields`` names the offenders."""

    def __init__(self, message: str, fields: list[str] | None = None):
        super().__init__(message)
        self.fields = list(fields or [])


class DomainError(ValueError):
    """Argument outside the mathematical domain of a formula."""


class GuardError(RuntimeError):
    """A runtime resource guard was hit (e.g. codebook too large to enumerate)."""
