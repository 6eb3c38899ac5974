"""Exception types shared across the package."""


class DomainError(ValueError):
    """A cost function was evaluated at a negative load."""


class CalculusUnavailable(TypeError):
    """The cost model has no derivative, integral or marginal form."""


class PathExplosion(RuntimeError):
    """More simple paths exist than the enumeration cap allows."""

    def __init__(self, cap):
        super().__init__(f"more than {cap} simple paths; raise the cap or use a shortest-path oracle")
        self.cap = cap


class NoPath(RuntimeError):
    """A commodity's terminals are not connected."""


class NotConverged(RuntimeError):
    """The solver hit its iteration budget before reaching tolerance.

    The best iterate and its certificate are attached so callers can still
    inspect or use them.
    """

    def __init__(self, message, flow=None, certificate=None):
        super().__init__(message)
        self.flow = flow
        self.certificate = certificate


class Unsupported(ValueError):
    """No analytic result or construction covers the requested combination."""


class InvalidFlow(ValueError):
    """A flow state violates conservation, sign or mass constraints."""

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)
