"""Exception hierarchy shared by all modules."""


class UnbiasedPDEError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(UnbiasedPDEError, ValueError):
    pass


class EpsilonTooLarge(ParameterError):
    pass


class InvalidQ(ParameterError):
    pass


class InvalidOverride(ParameterError):
    pass


class PathError(UnbiasedPDEError, ValueError):
    pass


class CoarsenAtLevelZero(PathError):
    pass


class SwapAtLevelZero(PathError):
    pass


class DimensionMismatch(UnbiasedPDEError, ValueError):
    pass


class BasisEvaluationFailure(UnbiasedPDEError):
    """A user-supplied basis function raised or returned a malformed value."""


class IndexRange(UnbiasedPDEError, IndexError):
    pass


class QuadratureNonConvergence(UnbiasedPDEError, ArithmeticError):
    pass


class ConfigError(UnbiasedPDEError, ValueError):
    pass


class NumericFailure(UnbiasedPDEError, ArithmeticError):
    """A non-finite estimator sample was produced."""


class EmptyInput(UnbiasedPDEError, ValueError):
    pass
