"""
Density evolution of the peeling decoder in the y parametrization.

With x = ελ(y) the expected residual graph at "time" τ(y) has l̂_k = ελ_k y^k edges at
degree-k variables and r̂_j edges at degree-j checks, all normalized by the edge count ξ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import bisect

from .core import Y_MIN, DomainError, RangeError, SingularityError, binomial, logger
from .ensemble import Ensemble, eval_poly

__all__ = [
    "EvolutionPoint",
    "means_at",
    "residual_means",
    "tau_of_y",
    "y_of_tau",
    "r1_slope",
    "r1_epsilon_derivative",
    "f_function",
]

# Largest allowed |tau_of_y(y_of_tau(τ)) - τ|.
TAU_TOLERANCE = 1e-12


@dataclass(frozen=True)
class EvolutionPoint:
    """
    Every y-indexed scalar of the density-evolution layer at one (ε, y).

    `mean_r` and `G` are indexed by check degree 1..d_c; `mean_l` by the variable degrees of λ.
    """

    y: float
    epsilon: float
    x: float
    x_tilde: float
    e: float
    a: float
    x_prime: float
    x_second: float
    F: float
    F_prime: float
    mean_l: dict[int, float]
    mean_r: dict[int, float]
    G: dict[int, float]
    G_sigma: float

    @property
    def dc(self) -> int:
        return max(self.mean_r)

    @property
    def r1(self) -> float:
        return self.mean_r[1]


def _check_domain(epsilon: float, y: float, allow_zero_y: bool = False) -> None:
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"erasure probability outside [0, 1]: {epsilon!r}")
    low_ok = y >= 0.0 if allow_zero_y else y > 0.0
    if not (low_ok and y <= 1.0):
        raise DomainError(f"y outside (0, 1]: {y!r}")


def residual_means(
    ens: Ensemble, epsilon: float, y: float
) -> tuple[dict[int, float], dict[int, float]]:
    """
    Mean residual edge fractions (l̂_k, r̂_j) at (ε, y), including r̂_{d_c+1} = 0.

    Unlike `means_at` this is defined at x = 0.
    """
    _check_domain(epsilon, y, allow_zero_y=True)
    x = epsilon * eval_poly(ens.lambda_, y)
    x_tilde = 1.0 - x
    mean_l = {k: epsilon * lk * y**k for k, lk in ens.lambda_}
    dc = ens.dc
    mean_r: dict[int, float] = {1: x * (y - 1.0 + eval_poly(ens.rho, x_tilde))}
    for j in range(2, dc + 1):
        mean_r[j] = math.fsum(
            rho_i * binomial(i - 1, j - 1) * x**j * x_tilde ** (i - j)
            for i, rho_i in ens.rho
            if i >= j
        )
    mean_r[dc + 1] = 0.0
    return mean_l, mean_r


def f_function(ens: Ensemble, epsilon: float, y: float) -> tuple[float, float]:
    """
    (F, F′) with F = Σ_{i∈L} λ_i/i [ε²(y^i − 1)² + ε(y^i − 1)] and F′ = dF/dy.
    """
    F = math.fsum(
        li / i * (epsilon**2 * (y**i - 1.0) ** 2 + epsilon * (y**i - 1.0)) for i, li in ens.lambda_
    )
    x = epsilon * eval_poly(ens.lambda_, y)
    F_prime = (
        2.0 * math.fsum(epsilon**2 * li * y ** (2 * i - 1) for i, li in ens.lambda_)
        - (2.0 * epsilon - 1.0) * x
    )
    return F, F_prime


def means_at(ens: Ensemble, epsilon: float, y: float) -> EvolutionPoint:
    """
    Evaluate the density-evolution quantities at (ε, y).

    Raises `SingularityError` when x = ελ(y) vanishes, since G_j and a carry a 1/x factor.
    """
    _check_domain(epsilon, y)
    lam = eval_poly(ens.lambda_, y)
    x = epsilon * lam
    if x == 0.0:
        raise SingularityError(f"x = ελ(y) vanishes at epsilon={epsilon!r}, y={y!r}")
    mean_l, mean_r = residual_means(ens, epsilon, y)
    dc = ens.dc
    x_prime = epsilon * eval_poly(ens.lambda_, y, derivative=1)
    x_second = epsilon * eval_poly(ens.lambda_, y, derivative=2)
    F, F_prime = f_function(ens, epsilon, y)
    G = {j: j * (mean_r[j + 1] - mean_r[j]) / x for j in range(1, dc)}
    G[dc] = -dc * mean_r[dc] / x
    e = x * y
    return EvolutionPoint(
        y=y,
        epsilon=epsilon,
        x=x,
        x_tilde=1.0 - x,
        e=e,
        a=(x_prime * y + x) / x,
        x_prime=x_prime,
        x_second=x_second,
        F=F,
        F_prime=F_prime,
        mean_l=mean_l,
        mean_r={j: mean_r[j] for j in range(1, dc + 1)},
        G=G,
        G_sigma=(dc * mean_r[dc] - e) / x,
    )


def tau_of_y(ens: Ensemble, epsilon: float, y: float) -> float:
    """
    Normalized decoding time τ(y) = ε Σ_{i∈L} λ_i (1 − y^i)/i; τ(1) = 0.
    """
    _check_domain(epsilon, y, allow_zero_y=True)
    return epsilon * math.fsum(li * (1.0 - y**i) / i for i, li in ens.lambda_)


def y_of_tau(ens: Ensemble, epsilon: float, tau: float, y_min: float = Y_MIN) -> float:
    """
    Inverse of `tau_of_y` on [y_min, 1] by bisection.
    """
    if tau < 0.0 or not math.isfinite(tau):
        raise DomainError(f"tau must be a finite non-negative number: {tau!r}")
    if not 0.0 < y_min < 1.0:
        raise DomainError(f"y floor outside (0, 1): {y_min!r}")
    if tau == 0.0:
        return 1.0
    tau_max = tau_of_y(ens, epsilon, y_min)
    if tau > tau_max:
        raise RangeError(f"tau={tau!r} exceeds tau(y_min)={tau_max!r} at y_min={y_min!r}")
    if tau == tau_max:
        return y_min

    def gap(y: float) -> float:
        return tau_of_y(ens, epsilon, y) - tau

    y: float = bisect(gap, y_min, 1.0, xtol=1e-15, maxiter=200)
    if abs(gap(y)) > TAU_TOLERANCE:
        logger.warning(f"y_of_tau residual {gap(y)!r} at tau={tau!r}")
    return y


def r1_slope(ens: Ensemble, epsilon: float, y: float) -> float:
    """
    dr̂_1/dy = x′(y − 1 + ρ(x̃)) + x(1 − ρ′(x̃)x′).
    """
    _check_domain(epsilon, y, allow_zero_y=True)
    x = epsilon * eval_poly(ens.lambda_, y)
    x_prime = epsilon * eval_poly(ens.lambda_, y, derivative=1)
    x_tilde = 1.0 - x
    return x_prime * (y - 1.0 + eval_poly(ens.rho, x_tilde)) + x * (
        1.0 - eval_poly(ens.rho, x_tilde, derivative=1) * x_prime
    )


def r1_epsilon_derivative(ens: Ensemble, epsilon: float, y: float) -> float:
    """
    ∂r̂_1/∂ε at fixed y: λ(y)[(y − 1 + ρ(x̃)) − xρ′(x̃)].

    At a critical point the first term vanishes, leaving −λ(y)xρ′(x̃).
    """
    _check_domain(epsilon, y, allow_zero_y=True)
    lam = eval_poly(ens.lambda_, y)
    x = epsilon * lam
    x_tilde = 1.0 - x
    return lam * (
        (y - 1.0 + eval_poly(ens.rho, x_tilde)) - x * eval_poly(ens.rho, x_tilde, derivative=1)
    )
