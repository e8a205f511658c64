"""Exception hierarchy shared across the package."""


class PolyharmError(Exception):
    """Base class for all errors raised by polyharm."""


class InvalidInputError(PolyharmError, ValueError):
    pass


class InvalidDimensionError(InvalidInputError):
    pass


class DegeneracyError(PolyharmError, ValueError):
    pass


class InadmissibleError(PolyharmError, ValueError):
    """A homotopy class or defect configuration violates a sum rule."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class ResolutionError(PolyharmError):
    """A sampled surface map is too coarse to resolve integer invariants."""


class NotRegularError(PolyharmError, ValueError):
    pass


class ClassConsistencyError(PolyharmError, ValueError):
    pass


class ClassAmbiguousError(PolyharmError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NumericalFailure(PolyharmError, ArithmeticError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class AccuracyError(PolyharmError, ArithmeticError):
    pass


class EvaluationError(PolyharmError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location
