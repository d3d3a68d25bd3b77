"""Exception hierarchy shared by the library and the command-line front end."""


class SidepayError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SidepayError, ValueError):
    """Invalid model parameters, prices or scenario documents (CLI exit code 2)."""


class CalibrationError(ValidationError):
    """The smooth demand model cannot be calibrated from the given constants."""


class SolverError(SidepayError, RuntimeError):
    """A solver failed to converge or no interior equilibrium exists (CLI exit code 3)."""
