"""Exception hierarchy.

Validation problems (bad inputs) and numerical problems (inputs that are
well-formed but cannot be processed reliably) are kept apart so the CLI can
map them to distinct exit codes.
"""


class IncentivesError(Exception):
    pass


class ValidationError(IncentivesError, ValueError):
    pass


class NonnegativityError(ValidationError):
    pass


class DegeneracyError(ValidationError):
    def __init__(self, message, cls=None):
        super().__init__(message)
        self.cls = cls


class BoundaryError(ValidationError):
    pass


class NumericalError(IncentivesError, ArithmeticError):
    pass


class InvertibilityError(NumericalError):
    pass


class ImageError(NumericalError):
    def __init__(self, message, violation=0.0):
        super().__init__(message)
        self.violation = violation


class DivergenceError(NumericalError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
