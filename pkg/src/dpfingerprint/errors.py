"""Exception hierarchy shared by the library and the command line tool."""


class FingerprintError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(FingerprintError, ValueError):
    """A numeric parameter is outside its valid range."""


class SchemaError(FingerprintError):
    """Input data does not conform to the declared schema."""


class IntegrityError(SchemaError):
    """Primary keys are duplicated or otherwise inconsistent."""


class PreconditionError(FingerprintError, ValueError):
    """An operation was called with inputs violating its precondition."""


class AlignmentError(FingerprintError):
    """Two databases that should share a key set do not."""


class ConfigurationError(FingerprintError):
    """Required side information (e.g. a reference distribution) is missing."""


class SizeError(FingerprintError, ValueError):
    """An exact computation was requested on an instance that is too large."""


class NonTerminationError(FingerprintError, RuntimeError):
    """An iterative search exceeded its safety cap."""


class BudgetInfeasibleError(FingerprintError):
    """No positive comparison budget satisfies the requested total budget.

    Attributes:
        max_feasible_epsilon: the largest insertion budget for which a
            solution exists under the same total budget, C and delta'.
    """

    def __init__(self, message, max_feasible_epsilon=None):
        super().__init__(message)
        self.max_feasible_epsilon = max_feasible_epsilon
