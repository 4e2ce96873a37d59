"""Exception and warning types shared across the package."""


class TlscavityError(Exception):
    """Base class for package errors."""


class ConfigError(TlscavityError):
    """Invalid or inconsistent configuration input."""


class DataError(TlscavityError):
    """Unreadable or malformed data file."""


class FitError(TlscavityError):
    """Fit failed to converge.

    Carries the iteration log accumulated up to the failure, when available.
    """

    def __init__(self, message, convergence_log=None):
        super().__init__(message)
        self.convergence_log = list(convergence_log) if convergence_log else []


class UnidentifiableError(FitError):
    """Data cannot constrain the requested parameters."""


class SaturationError(TlscavityError):
    """Effective cavity linewidth went non-positive (bath gain exceeds loss)."""


class StepConvergenceError(TlscavityError):
    """Discretization self-check failed: halving the step moved the result.

    Stores the relative deviation and the two trial resolutions.
    """

    def __init__(self, message, deviation=None, resolutions=None):
        super().__init__(message)
        self.deviation = deviation
        self.resolutions = resolutions


class ValidityWarning(UserWarning):
    """Model evaluated outside its stated validity window."""
