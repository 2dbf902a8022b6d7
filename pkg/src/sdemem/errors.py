"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad dimensions, incompatible options, malformed files."""


class DegenerateKernelError(ValueError):
    """The Crank-Nicolson kernel has no density at rho = 1."""


class DegenerateWeightsError(ValueError):
    """Particle weights are negative, all zero, or not normalized."""


class NumericalModelError(RuntimeError):
    """A model evaluation produced an invalid numerical result.

    Carries the offending state so filter-level callers can report where the
    path left the model's domain.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class UnsupportedModelError(ValueError):
    """The requested operation needs a model capability that is absent."""


class UndefinedStatisticError(ValueError):
    """A statistic (ESS, correlation) is undefined for the given input."""


class TuningFailureError(RuntimeError):
    """Particle-count tuning exceeded the configured cap.

    ``detail`` holds the search history so callers can report partial results.
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class StartupDegeneracyError(RuntimeError):
    """A filter returned a zero likelihood estimate during chain startup."""

    def __init__(self, message, unit_id=None):
        super().__init__(message)
        self.unit_id = unit_id


class InvalidStateError(RuntimeError):
    """The current MCMC state has an estimated density of zero."""
