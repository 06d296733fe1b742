"""Exception types raised across the package."""


class MeasKerrError(Exception):
    """Base class for all package errors."""


class TruncationTooSmall(MeasKerrError):
    pass


class NonFiniteAmplitude(MeasKerrError):
    pass


class DimensionMismatch(MeasKerrError):
    pass


class NoSolution(MeasKerrError):
    """No rotation angle reaches the requested Kerr strength.

    Attributes:
        gamma_max: the largest |gamma| reachable at the given squeezing.
    """

    def __init__(self, gamma_target, gamma_max):
        self.gamma_target = gamma_target
        self.gamma_max = gamma_max
        super().__init__(
            f"|gamma|={abs(gamma_target):.6g} exceeds gamma_max={gamma_max:.6g}"
        )


class ThetaNearSingular(MeasKerrError):
    pass


class QuadratureNotConverged(MeasKerrError):
    def __init__(self, message, estimate=None, error=None, n_panels=None):
        self.estimate = estimate
        self.error = error
        self.n_panels = n_panels
        super().__init__(message)


class NonPositiveFI(MeasKerrError):
    pass


class HPViolation(MeasKerrError):
    def __init__(self, leaked):
        self.leaked = leaked
        super().__init__(f"Holstein-Primakoff leakage {leaked:.3e} exceeds 1e-3")


class ConfigError(MeasKerrError):
    pass
