"""Exception types shared across the package.

Everything raised on purpose derives from ValueError, ArithmeticError or
RuntimeError so callers that do not care about the fine distinctions can
still catch broad builtin categories.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(ValueError):
    """Array shapes or model orders are inconsistent with each other."""


class DataError(ValueError):
    """An input data file cannot be turned into a usable series."""


class ConfigError(ValueError):
    """A run configuration is invalid or internally contradictory."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value where a finite one is required."""


class SamplerError(RuntimeError):
    """Posterior mode search or MCMC sampling failed.

    May carry the best point found so far in ``best`` (a tuple of the
    argument vector and its objective value) when raised by the optimizer.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
