class SynthCouplingError(Exception):
    """
    Base class for every error raised by this project. The optional <details> dict carries the
    numbers that triggered the error, so that the CLI can dump them into a diagnostic file.
    """
    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class ConfigError(SynthCouplingError, ValueError):
    pass


class DimensionError(SynthCouplingError, ValueError):
    pass


class NumericalError(SynthCouplingError, RuntimeError):
    pass


class InstabilityError(NumericalError):
    # Parametric drive at or above the threshold |lambda| = delta_c
    pass


class IntegrationError(NumericalError):
    pass


class PositivityError(NumericalError):
    pass


class SteadyStateError(NumericalError):
    pass


class CutoffError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class CutoffWarning(UserWarning):
    """
    Emitted when a truncated Fock space is too small for the requested operation (squeezed vacuum
    tail beyond the cutoff, Wigner grid too coarse to integrate to one).
    """
    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class DecayWarning(UserWarning):
    """
    Emitted when a correlation function has not decayed below the requested ratio by t_max.
    """
    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details
