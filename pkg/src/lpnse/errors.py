"""Exception hierarchy shared by every lpnse module."""


class LPNSEError(Exception):
    """Base class for all errors raised by lpnse."""


class ConfigurationError(LPNSEError, ValueError):
    """Array shapes or grids do not match."""


class SymmetryError(LPNSEError, ValueError):
    """Spectral data lacks the Hermitian symmetry of a real field."""


class ParameterError(LPNSEError, ValueError):
    """A numerical parameter is outside its admissible range."""


class DegenerateInputError(LPNSEError, ValueError):
    """The input makes a ratio or normalisation undefined (e.g. a zero field)."""


class InvalidProfileError(LPNSEError, ValueError):
    """A cutoff profile violates the support or monotonicity constraints."""


class StepRejectedError(LPNSEError):
    """The requested time step violates the CFL limit."""

    def __init__(self, message, state=None, limit=None):
        super().__init__(message)
        self.state = state
        self.limit = limit


class BlowUpError(LPNSEError):
    """Non-finite values or runaway enstrophy; carries the last good state."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class ConfigError(LPNSEError, ValueError):
    """Malformed run configuration file."""

    def __init__(self, message, line=None, key=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.key = key
