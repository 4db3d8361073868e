"""Exception hierarchy shared by the simulation and identification modules."""


class SudsError(Exception):
    """Base class for all package errors."""


class ConfigError(SudsError, ValueError):
    """Invalid system, gait, noise or fit configuration."""


class NumericalError(SudsError, ArithmeticError):
    """Base class for failures the CLI reports with exit code 2."""


class SingularConstraint(NumericalError):
    """The group block of the Pfaffian constraint is numerically singular."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NonDissipative(NumericalError):
    """M_pp + F_p failed the positive-definiteness check."""


class DegenerateOscillation(NumericalError):
    """Shape series does not span a usable oscillation plane."""


class IllConditioned(NumericalError):
    """Fourier design matrix is too badly conditioned to fit."""


class InsufficientCoverage(NumericalError):
    """One or more phase bins have too little kernel weight to fit."""

    def __init__(self, message, bins=()):
        super().__init__(message)
        self.bins = list(bins)


class DegenerateTemplate(NumericalError):
    """Template error sum is zero, so the accuracy ratio is undefined."""
