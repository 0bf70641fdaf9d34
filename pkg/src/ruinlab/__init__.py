"""Survival probability of a jump-diffusion risk reserve from discrete observations.

Modules:

- ``process``: exact simulation and discretisation of the reserve path
- ``threshold``: jump filter and the estimators built on it
- ``laplace``: survival transform and its regularized inversion
- ``gof``: goodness-of-fit tests for the recovered claim law
- ``harness`` / ``cli``: configuration, Monte Carlo driver, command line
"""

__version__ = "0.1.0"

from .claims import Degenerate, Exponential, Gamma, Pareto  # noqa: E402
from .process import DiscreteRecord, ModelParams, PathRecord, discretize, simulate_path  # noqa: E402
from .threshold import EstimateSet, ThresholdSpec, estimate  # noqa: E402

__all__ = [
    "__version__",
    "Degenerate",
    "Exponential",
    "Gamma",
    "Pareto",
    "ModelParams",
    "PathRecord",
    "DiscreteRecord",
    "simulate_path",
    "discretize",
    "ThresholdSpec",
    "EstimateSet",
    "estimate",
]
