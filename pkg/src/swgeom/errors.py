"""Exception hierarchy shared by all modules."""


class SwgeomError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SwgeomError, ValueError):
    """Bad user input (CLI exit code 1)."""


class InvalidCoordinates(ValidationError):
    pass


class InvalidScale(ValidationError):
    pass


class InvalidModel(ValidationError):
    pass


class InvalidField(ValidationError):
    pass


class MatchingViolation(ValidationError):
    def __init__(self, message, gap_index=None):
        super().__init__(message)
        self.gap_index = gap_index


class EvaluationError(ValidationError):
    pass


class NumericalFailure(SwgeomError, ArithmeticError):
    """A numerical procedure gave up (CLI exit code 2)."""


class NonConvergent(NumericalFailure):
    def __init__(self, message, estimate=None, error=None, entry=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.entry = entry


class DegenerateMatching(NumericalFailure):
    pass


class StiffnessError(NumericalFailure):
    def __init__(self, message, state=None, t=None):
        super().__init__(message)
        self.state = state
        self.t = t
