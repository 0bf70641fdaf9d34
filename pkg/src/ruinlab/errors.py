"""Exception hierarchy shared by all ruinlab modules."""


class RuinlabError(Exception):
    """Base class for every error raised by ruinlab."""


class ParameterError(RuinlabError, ValueError):
    """Invalid model or claim-distribution parameters."""


class GridError(RuinlabError, ValueError):
    """Observation or evaluation grid is inconsistent."""


class SpecError(RuinlabError, ValueError):
    """Invalid threshold specification."""


class DegenerateInputError(RuinlabError, ValueError):
    """The data do not support the requested estimator."""


class NetProfitError(RuinlabError, ValueError):
    """The net profit condition c > lambda * mu is violated."""


class EstimateDegenerateError(RuinlabError, ValueError):
    """Estimated parameters leave the admissible region (e.g. rho >= 1)."""


class EvaluationError(RuinlabError, ArithmeticError):
    """A transform could not be evaluated at the requested argument."""

    def __init__(self, message, argument=None):
        super().__init__(message)
        self.argument = argument


class DomainError(RuinlabError, ValueError):
    """Argument outside the domain of a numerical routine."""


class ConfigError(RuinlabError, ValueError):
    """Malformed configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
