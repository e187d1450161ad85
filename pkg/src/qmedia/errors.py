"""Exception hierarchy shared across the package."""


class QMediaError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(QMediaError, ValueError):
    """A physical or configuration parameter is out of its allowed range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(QMediaError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ConfigurationError(QMediaError, ValueError):
    pass


class InputError(QMediaError, ValueError):
    pass


class AccuracyError(QMediaError, ArithmeticError):
    """Numerical quadrature or iteration did not reach the requested accuracy."""

    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (achieved residual {residual:.3e})")


class SingularityError(QMediaError, ArithmeticError):
    def __init__(self, message, k):
        self.k = k
        super().__init__(f"{message} at k={k!r}")


class BracketNotFoundError(QMediaError, ArithmeticError):
    def __init__(self, message, k_range):
        self.k_range = tuple(k_range)
        super().__init__(f"{message}; scanned k in [{k_range[0]:.6g}, {k_range[1]:.6g}]")


class DegenerateStateError(QMediaError, ValueError):
    pass


class InconsistentFieldsError(QMediaError, ValueError):
    pass


class BlowUpError(QMediaError, FloatingPointError):
    """Non-finite field encountered during time stepping.

    ``last_state`` holds the last state that was still finite.
    """

    def __init__(self, t, last_state=None):
        self.t = t
        self.last_state = last_state
        super().__init__(f"non-finite wavefunction at t={t:.6g}")


class FitWindowError(QMediaError, ValueError):
    pass


class NonlinearContaminationError(QMediaError, ValueError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(
            f"neither oscillatory nor exponential model fits (relative residual "
            f"{residual:.3e}); reduce the perturbation amplitude"
        )
