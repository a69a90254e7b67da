"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of a physical formula."""


class EstimationError(ValueError):
    """Count rates that cannot be turned into an occupancy."""


class NumericalError(RuntimeError):
    """A quadrature, solver or fit did not reach the requested accuracy."""


class ValidationError(ValueError):
    """A configuration that parses but violates a physical constraint."""


class ConfigError(ValueError):
    """Malformed configuration text; carries the offending line and field."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class FitError(NumericalError):
    """A fit could not be carried out or did not converge."""
