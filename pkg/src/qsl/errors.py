"""Exception hierarchy shared by all modules."""


class QslError(Exception):
    """Base class for library errors."""


class ValidationError(QslError, ValueError):
    """Malformed input."""


class CapacityError(QslError):
    """Requested size exceeds a simulation or enumeration budget."""


class DegenerateError(QslError):
    """Input leads to a degenerate quantity (zero amplitude, constant data)."""


class DecompositionError(QslError):
    """Oracle circuit does not split as compute / phase / uncompute."""


class RewriteError(QslError):
    """Partial-uncompute preconditions violated."""


class RoutingError(QslError):
    """Placement or routing on a coupling graph failed."""


class FitError(QslError):
    """Curve fit did not converge."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
