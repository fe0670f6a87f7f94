"""
Threshold, critical point, slope scaling parameter and waterfall prediction.

Below threshold the peeling decoder keeps a degree-one check as long as
h(y) = y − 1 + ρ(1 − ελ(y)) stays positive on (0, 1]. At the threshold ε* the curve touches
zero at the critical point y*, and the block error probability of length-n codes behaves like
Q(√n (ε* − ε)/α).
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq
from scipy.special import erfc
from serde import serde

from .core import (
    SETTINGS,
    DegenerateMinimumError,
    DomainError,
    NumericalError,
    logger,
)
from .covariance import covariance_analytic
from .ensemble import Ensemble, eval_poly, poly_values

__all__ = [
    "ScalingResult",
    "WaterfallPoint",
    "threshold",
    "critical_point",
    "alpha",
    "q_function",
    "waterfall",
]

# Default y-grid for the feasibility scan.
GRID_POINTS = 10_000
GRID_START = 1e-4

# Absolute tolerance of the ε bisection.
THRESHOLD_TOLERANCE = 1e-12

# Width at which golden-section refinement stops.
GOLDEN_TOLERANCE = 1e-10

# Local minima whose values differ by less than this are treated as equally critical.
FLAT_TOLERANCE = 1e-10

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@serde
@dataclass
class ScalingResult:
    """
    Threshold, critical point and slope scaling parameter of an ensemble.

    `alpha` includes the factor √(n/ξ) = √(Σ λ_i/i); `alpha_normalized` leaves it out.
    `alpha_covariance` is the same quantity obtained from the closed-form variance of r_1, and
    `alpha_regular` the regular-ensemble expression (None for irregular ensembles).
    """

    epsilon_star: float
    y_star: float
    x_star: float
    alpha: float
    alpha_normalized: float
    alpha_covariance: float
    alpha_regular: Optional[float] = None


@serde
@dataclass
class WaterfallPoint:
    epsilon: float
    p_block: float


def _margin(
    ens: Ensemble, epsilon: float, ys: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    return ys - 1.0 + poly_values(ens.rho, 1.0 - epsilon * poly_values(ens.lambda_, ys))


def _margin_at(ens: Ensemble, epsilon: float, y: float) -> float:
    return y - 1.0 + eval_poly(ens.rho, 1.0 - epsilon * eval_poly(ens.lambda_, y))


def _golden_section(
    f: Callable[[float], float], a: float, b: float, tol: float = GOLDEN_TOLERANCE
) -> tuple[float, float, float]:
    """
    Minimize a unimodal `f` on [a, b]. Returns the final bracket and the minimizer.
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return a, b, 0.5 * (a + b)


def _local_minima(values: npt.NDArray[np.float64]) -> list[int]:
    inner = np.flatnonzero((values[1:-1] <= values[:-2]) & (values[1:-1] <= values[2:])) + 1
    return [int(i) for i in inner]


def _grid(points: int) -> npt.NDArray[np.float64]:
    return np.linspace(GRID_START, 1.0, points)


def _min_margin(ens: Ensemble, epsilon: float, ys: npt.NDArray[np.float64]) -> float:
    values = _margin(ens, epsilon, ys)
    best = float(np.min(values))
    for i in _local_minima(values):
        _, _, y = _golden_section(
            lambda t: _margin_at(ens, epsilon, t), float(ys[i - 1]), float(ys[i + 1])
        )
        best = min(best, _margin_at(ens, epsilon, y))
    return best


def _is_stable(ens: Ensemble, epsilon: float) -> bool:
    # slope of the margin at y = 0
    return epsilon * ens.lambda_[2] * eval_poly(ens.rho, 1.0, derivative=1) <= 1.0


def threshold(
    ens: Ensemble, tol: float = THRESHOLD_TOLERANCE, grid_points: int = GRID_POINTS
) -> float:
    """
    BP threshold ε* = sup{ε : y > 1 − ρ(1 − ελ(y)) for all y in (0, 1]}.

    Bisection on ε. An ε is feasible when the margin h(y) is positive on the y-grid, with
    every interior grid minimum refined by golden-section search, and the stability condition
    ελ_2ρ′(1) <= 1 holds.
    """
    ys = _grid(grid_points)

    def feasible(epsilon: float) -> bool:
        return _is_stable(ens, epsilon) and _min_margin(ens, epsilon, ys) > 0.0

    lo, hi = 0.0, 1.0
    if feasible(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
        if SETTINGS["debug"]:
            logger.debug(f"threshold bracket [{lo!r}, {hi!r}]")
    eps = 0.5 * (lo + hi)
    logger.debug(f"threshold of {ens.describe()}: {eps!r}")
    return eps


def critical_point(ens: Ensemble, epsilon_star: float, grid_points: int = GRID_POINTS) -> float:
    """
    The y minimizing h(y) = y − 1 + ρ(1 − ε*λ(y)) over (0, 1).

    The grid minimizer is refined by golden-section search, then polished with a root of the
    tangency condition ρ′(x̃)ε*λ′(y) = 1 when that root is bracketed. With several minima of
    equal depth the smallest y is returned and a warning is logged.
    """
    if not 0.0 < epsilon_star <= 1.0:
        raise DomainError(f"threshold outside (0, 1]: {epsilon_star!r}")
    ys = _grid(grid_points)
    values = _margin(ens, epsilon_star, ys)
    idx = int(np.argmin(values))
    if idx == 0 or idx == len(ys) - 1:
        raise DegenerateMinimumError(
            f"minimum of the margin sits on the grid boundary y={ys[idx]!r} "
            f"for {ens.describe()} at epsilon={epsilon_star!r}"
        )

    def margin(t: float) -> float:
        return _margin_at(ens, epsilon_star, t)

    candidates = []
    for i in _local_minima(values):
        a, b, y = _golden_section(margin, float(ys[i - 1]), float(ys[i + 1]))
        candidates.append((margin(y), y, a, b))
    best = min(c[0] for c in candidates)
    flat = sorted((c for c in candidates if c[0] - best <= FLAT_TOLERANCE), key=lambda c: c[1])
    if len(flat) > 1:
        logger.warning(
            f"{len(flat)} critical points of equal depth for {ens.describe()}: "
            f"{[c[1] for c in flat]}, using the smallest"
        )
    _, y, a, b = flat[0]
    return float(_polish_tangency(ens, epsilon_star, y, a, b))


def _polish_tangency(ens: Ensemble, epsilon: float, y: float, a: float, b: float) -> float:
    def slope(t: float) -> float:
        x_tilde = 1.0 - epsilon * eval_poly(ens.lambda_, t)
        return 1.0 - eval_poly(ens.rho, x_tilde, derivative=1) * epsilon * eval_poly(
            ens.lambda_, t, derivative=1
        )

    width = max(b - a, GOLDEN_TOLERANCE)
    for _ in range(20):
        lo, hi = max(y - width, 0.0), min(y + width, 1.0)
        if slope(lo) * slope(hi) < 0.0:
            root: float = brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return root
        width *= 2.0
    return y


def alpha(ens: Ensemble) -> ScalingResult:
    """
    Slope scaling parameter α at the threshold.

    α = √E · √(n/ξ) / λ(y*) with
    E = (ρ(x̃)² − ρ(x̃²) − x̃²ρ′(x̃²))/ρ′(x̃)² + (1 − 2xρ(x̃))/ρ′(x̃)
        + x² − ε²λ(y²) − ε²y²λ′(y²)
    evaluated at (ε*, y*). It is cross-checked against
    −√(n/ξ) √δ_{r1,r1} / (∂r̂_1/∂ε).
    """
    eps = threshold(ens)
    y = critical_point(ens, eps)
    lam, lam_sq = eval_poly(ens.lambda_, y), eval_poly(ens.lambda_, y * y)
    x = eps * lam
    xt = 1.0 - x
    rho, rho_slope = eval_poly(ens.rho, xt), eval_poly(ens.rho, xt, derivative=1)
    energy = (
        (rho**2 - eval_poly(ens.rho, xt * xt) - xt * xt * eval_poly(ens.rho, xt * xt, 1))
        / rho_slope**2
        + (1.0 - 2.0 * x * rho) / rho_slope
        + x * x
        - eps**2 * lam_sq
        - eps**2 * y * y * eval_poly(ens.lambda_, y * y, derivative=1)
    )
    if not energy > 0.0:
        raise NumericalError(f"non-positive variance term {energy!r} at y*={y!r}")
    edge_factor = math.sqrt(ens.nodes_per_edge)
    alpha_normalized = math.sqrt(energy) / lam

    variance = covariance_analytic(ens, eps, y).entry("r1", "r1")
    if variance < 0.0:
        raise NumericalError(f"negative variance of r1 {variance!r} at y*={y!r}")
    r1_eps = -lam * x * rho_slope
    alpha_covariance = -edge_factor * math.sqrt(variance) / r1_eps

    alpha_regular = None
    if ens.is_regular:
        dv = ens.variable_degree
        alpha_regular = eps * math.sqrt((dv - 1) / dv * (1.0 / x - 1.0 / y))

    result = ScalingResult(
        epsilon_star=eps,
        y_star=y,
        x_star=x,
        alpha=alpha_normalized * edge_factor,
        alpha_normalized=alpha_normalized,
        alpha_covariance=alpha_covariance,
        alpha_regular=alpha_regular,
    )
    logger.debug(f"scaling parameters of {ens.describe()}: {result}")
    return result


def q_function(z: float) -> float:
    """
    Gaussian tail Q(z) = ½ erfc(z/√2).
    """
    if not math.isfinite(z):
        if math.isnan(z):
            raise DomainError("Q-function argument is NaN")
        return 0.0 if z > 0 else 1.0
    return float(0.5 * erfc(z / math.sqrt(2.0)))


def waterfall(
    ens: Ensemble,
    eps_list: Sequence[float],
    n: Optional[int] = None,
    result: Optional[ScalingResult] = None,
) -> list[WaterfallPoint]:
    """
    Predicted block error probability Q(√n (ε* − ε)/α) for every ε in `eps_list`.

    `n` defaults to the ensemble's block length; `result` skips recomputing the threshold.
    """
    block = n if n is not None else ens.require_n()
    if block <= 0:
        raise DomainError(f"block length must be positive: {block!r}")
    for eps in eps_list:
        if not 0.0 <= eps <= 1.0:
            raise DomainError(f"erasure probability outside [0, 1]: {eps!r}")
    scaling = result if result is not None else alpha(ens)
    root_n = math.sqrt(block)
    return [
        WaterfallPoint(
            epsilon=eps,
            p_block=q_function(root_n * (scaling.epsilon_star - eps) / scaling.alpha),
        )
        for eps in eps_list
    ]
