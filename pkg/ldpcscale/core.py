"""
ldpcscale core module.

Holds the package logger, the debug switch, the error hierarchy and the few numerical helpers
shared by every analysis module.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache
from typing import Optional

from scipy.special import gammaln

__all__ = [
    "logger",
    "init",
    "SETTINGS",
    "Y_MIN",
    "ScalingError",
    "ValidationError",
    "DomainError",
    "RangeError",
    "EnsembleError",
    "InfeasibleError",
    "NumericalError",
    "SingularityError",
    "InstabilityError",
    "DegenerateMinimumError",
    "binomial",
]

logger = logging.getLogger("ldpcscale")

SETTINGS = {"debug": False}

# Lowest y the analytic layers evaluate by default. 1/x and 1/e factors blow up below it.
Y_MIN = 1e-3

# Degrees above this use log-gamma binomials.
EXACT_BINOMIAL_LIMIT = 60


def init(debug: bool = False) -> None:
    SETTINGS["debug"] = debug


class ScalingError(Exception):
    """
    Base class of every error raised by ldpcscale.
    """


class ValidationError(ScalingError):
    """
    Invalid input: a parameter outside its documented domain or a malformed ensemble.
    """


class DomainError(ValidationError):
    """
    Argument outside the mathematical domain of an operation.
    """


class RangeError(ValidationError):
    """
    τ beyond the value reached at the configured y floor.
    """


class EnsembleError(ValidationError):
    """
    Malformed or inconsistent degree distribution.
    """

    def __init__(self, message: str, token: Optional[str] = None) -> None:
        super().__init__(message)
        self.token = token


class InfeasibleError(ValidationError):
    """
    Integer node counts cannot be made to agree on both sides of the graph.
    """


class NumericalError(ScalingError):
    """
    Numerical breakdown during an evaluation or an integration.
    """


class SingularityError(NumericalError):
    """
    A 1/x or 1/e factor is evaluated at zero.
    """


class InstabilityError(NumericalError):
    """
    An ODE state entry grew beyond the step-size error bound.
    """


class DegenerateMinimumError(NumericalError):
    """
    The critical point sits on the boundary of the search interval.
    """


@lru_cache(maxsize=4096)
def binomial(n: int, k: int) -> float:
    """
    Binomial coefficient C(n, k) as a float, zero outside 0 <= k <= n.

    Exact integer arithmetic for n up to 60, log-gamma above.
    """
    if k < 0 or k > n:
        return 0.0
    if n <= EXACT_BINOMIAL_LIMIT:
        return float(math.comb(n, k))
    return float(math.exp(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)))
