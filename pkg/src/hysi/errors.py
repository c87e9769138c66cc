"""Exception types shared across the package."""


class HysiError(Exception):
    """Base class for all package-specific errors."""


class DegenerateTruncation(HysiError):
    """Truncation interval carries no representable probability mass."""


class NonFiniteEvaluation(HysiError):
    """A function handed to the root finder returned NaN or +/-inf."""


class DegeneratePredictor(HysiError):
    """Predictor of interest has zero norm; projection undefined."""


class NoConvergence(HysiError):
    """Iterative solver failed to reach its tolerance within the cap."""


class DimensionMismatch(HysiError):
    """Inputs with incompatible shapes."""


class SingularGram(HysiError):
    """Gram matrix numerically singular (condition number too large)."""


class EmptyTruncation(HysiError):
    """Selection event infeasible at the supplied decorrelated statistic."""


class UniverseTooLarge(HysiError):
    """2^p candidate subsets exceed the configured cap."""


class InvalidGamma(HysiError):
    """Hybrid tuning parameter outside [0, alpha]."""


class ParseError(HysiError):
    """Malformed cell or row in a delimited input file."""


class MissingColumn(HysiError):
    """A named column is absent from the input file."""
