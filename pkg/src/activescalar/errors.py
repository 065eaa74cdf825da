"""Exception types shared across the package."""


class ActiveScalarError(Exception):
    """Base class for all package errors."""


class GridError(ActiveScalarError, ValueError):
    """Invalid grid geometry (dimension mismatch, non power of two, bad length)."""


class SymmetryError(ActiveScalarError, ValueError):
    """Fourier coefficients violate Hermitian symmetry."""


class DomainError(ActiveScalarError, ValueError):
    """Argument outside the mathematical domain of an operator."""


class NonFiniteError(ActiveScalarError, ArithmeticError):
    """A transform or operator produced NaN or infinite values."""


class WindowError(ActiveScalarError, ValueError):
    """Requested times leave the wrap-around-safe window of the periodic box."""


class ConfigurationError(ActiveScalarError, ValueError):
    """Inconsistent coupling, solver or study configuration."""


class BlowUpError(ActiveScalarError, RuntimeError):
    """The evolution produced non-finite values or runaway growth.

    ``time`` is the simulation time at detection and ``last_good`` the last
    finite state (a ScalarField) when one is available.
    """

    def __init__(self, message, time=None, last_good=None):
        super().__init__(message)
        self.time = time
        self.last_good = last_good


class StepRejected(ActiveScalarError):
    """Advective stability guard violated; the caller should halve dt."""

    def __init__(self, message, cfl=None):
        super().__init__(message)
        self.cfl = cfl


class SnapshotError(ActiveScalarError, ValueError):
    """Malformed ASF1 snapshot file."""
