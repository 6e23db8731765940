"""Exception hierarchy shared by all regkern modules."""


class RegKernError(Exception):
    """Base class for every error raised by regkern."""


class DimensionError(RegKernError, ValueError):
    """Array shapes are inconsistent with each other or with the model order."""


class IllConditionedError(RegKernError, ArithmeticError):
    """A matrix that must be inverted is numerically singular.

    Attributes
    ----------
    condition : float
        The condition-number estimate that triggered the error.
    """

    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = float(condition)


class InvalidKernelError(RegKernError, ValueError):
    """A kernel matrix is not symmetric positive semidefinite."""


class DomainError(RegKernError, ValueError):
    """A hyperparameter lies outside its feasible box."""


class UndefinedFitError(RegKernError, ValueError):
    """The fit metric is undefined because the true impulse response is constant."""


class MissingTruthError(RegKernError, ValueError):
    """An oracle criterion was requested without the true impulse response."""


class NonConvergenceError(RegKernError, RuntimeError):
    """No optimizer restart met the convergence test.

    Attributes
    ----------
    best : object
        The best iterate found (an ``EstimateReport`` for hyperparameter
        estimation, a plain result record otherwise).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(RegKernError, ValueError):
    """A configuration file or value is malformed."""
