"""Exception types raised by the solver library."""


class ConfigurationError(ValueError):
    """Invalid discretization, mesh, or run configuration."""


class AdmissibilityError(ValueError):
    """A state left the admissible set (e.g. nonpositive density or pressure)."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NonconvergenceError(RuntimeError):
    """Newton iteration failed to reach the requested tolerance."""

    def __init__(self, message, stats=None, field=None):
        super().__init__(message)
        self.stats = stats
        self.field = field


class StabilityError(RuntimeError):
    """An explicit time march blew up."""
