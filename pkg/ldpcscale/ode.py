"""
Numerical covariance evolution.

Integrates dΔ/dy = −(e/y)(JΔ + ΔJᵀ + S) from the initial covariance at y = 1 down to the
requested y values with fixed-step classical Runge-Kutta. J holds the partial derivatives of
the mean drift with respect to the residual counts and S the one-step covariance source. The
state is the packed upper triangle of Δ.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt
from serde import coerce, serde

from .core import (
    SETTINGS,
    Y_MIN,
    InstabilityError,
    SingularityError,
    ValidationError,
    logger,
)
from .covariance import CovarianceMatrix, covariance_analytic, covariance_labels, initial_covariance
from .dde import EvolutionPoint, means_at
from .ensemble import Ensemble

__all__ = [
    "OdeConfig",
    "VerifyPoint",
    "VerifyReport",
    "covariance_rhs",
    "covariance_ode",
    "integrate_covariance",
    "verify",
]

# Any state entry beyond this magnitude aborts the integration.
INSTABILITY_BOUND = 1e6

# e(y) below this is treated as the singular end of the trajectory.
E_FLOOR = 1e-12

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]


@serde(type_check=coerce)
@dataclass
class OdeConfig:
    """
    Integrator settings.

    `y_target` is where `covariance_ode` stops; `comparison_tolerance` is the largest absolute
    entry difference `verify` accepts against the closed form.
    """

    y_target: float
    step: float = 1e-4
    method: Literal["rk4_fixed"] = "rk4_fixed"
    comparison_tolerance: float = 1e-5
    y_min: float = Y_MIN

    def __post_init__(self) -> None:
        if not 0.0 < self.step <= 1e-2:
            raise ValidationError(f"step must lie in (0, 1e-2]: {self.step!r}")
        if not 0.0 < self.y_min < 1.0:
            raise ValidationError(f"y_min must lie in (0, 1): {self.y_min!r}")
        if not self.y_min <= self.y_target < 1.0:
            raise ValidationError(
                f"y_target must lie in [{self.y_min!r}, 1): {self.y_target!r}"
            )
        if self.method != "rk4_fixed":
            raise ValidationError(f"unsupported integration method: {self.method!r}")
        if not self.comparison_tolerance > 0.0:
            raise ValidationError(
                f"comparison tolerance must be positive: {self.comparison_tolerance!r}"
            )


def _drift_jacobian(ens: Ensemble, p: EvolutionPoint) -> Matrix:
    """
    ∂f̂^(X)/∂Ẑ over the index set, one row per X.
    """
    labels = covariance_labels(ens)
    dc = ens.dc
    last = dc - 1
    e, a, y = p.e, p.a, p.y
    jac = np.zeros((len(labels), len(labels)))
    for row, (kind, idx) in enumerate(labels):
        for col, (zkind, zidx) in enumerate(labels):
            if kind == "l":
                if zkind == "l":
                    jac[row, col] = idx * p.mean_l[idx] / e**2 - (idx == zidx) * idx / e
            elif idx < last:
                if zkind == "l":
                    jac[row, col] = -(2.0 * a - zidx - 1.0) / e * p.G[idx] / y
                else:
                    jac[row, col] = idx * (a - 1.0) / e * ((zidx == idx + 1) - (zidx == idx))
            else:
                if zkind == "l":
                    jac[row, col] = (
                        last * (a - 1.0) / e - (2.0 * a - zidx - 1.0) / e * p.G[last] / y
                    )
                else:
                    jac[row, col] = -last * (a - 1.0) / e * (1 + (zidx == last))
    return jac


def _source(ens: Ensemble, p: EvolutionPoint) -> Matrix:
    """
    f̂^(X,Y), the covariance generated by a single decoding step.
    """
    labels = covariance_labels(ens)
    e, a, x, y = p.e, p.a, p.x, p.y
    curvature = (p.x_second * x - p.x_prime**2) / x**2
    drift = p.x_prime / x**2
    r = p.mean_r
    src = np.zeros((len(labels), len(labels)))
    for row, (kind, i) in enumerate(labels):
        for col in range(row, len(labels)):
            zkind, j = labels[col]
            if kind == "l" and zkind == "l":
                value = i * j * p.mean_l[i] / e * ((i == j) - p.mean_l[j] / e)
            elif kind == "l":
                value = (a - i) * i * p.mean_l[i] / e * p.G[j] / y
            else:
                value = curvature * p.G[i] * p.G[j] + i * j * drift * (
                    (i == j) * (r[j + 1] + r[j]) - (i == j + 1) * r[i] - (j == i + 1) * r[j]
                )
            src[row, col] = src[col, row] = value
    return src


def covariance_rhs(ens: Ensemble, epsilon: float, y: float, matrix: Matrix) -> Matrix:
    """
    dΔ/dy at (ε, y) for the covariance matrix `matrix`.
    """
    p = means_at(ens, epsilon, y)
    if p.e < E_FLOOR:
        raise SingularityError(f"e(y) = {p.e!r} below {E_FLOOR} at y={y!r}")
    jac = _drift_jacobian(ens, p)
    product = jac @ matrix
    result: Matrix = -(p.e / y) * (product + product.T + _source(ens, p))
    return result


def _rk4_step(f: Callable[[float, Vector], Vector], y: float, state: Vector, h: float) -> Vector:
    k1 = f(y, state)
    k2 = f(y + 0.5 * h, state + 0.5 * h * k1)
    k3 = f(y + 0.5 * h, state + 0.5 * h * k2)
    k4 = f(y + h, state + h * k3)
    result: Vector = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return result


def integrate_covariance(
    ens: Ensemble, epsilon: float, cfg: OdeConfig, checkpoints: Sequence[float]
) -> list[CovarianceMatrix]:
    """
    Integrate once from y = 1 and return the matrix at every checkpoint, in input order.

    Each interval between consecutive checkpoints is split into equal steps no longer than
    `cfg.step`, so a checkpoint is always hit exactly.
    """
    if not checkpoints:
        return []
    for y in checkpoints:
        if not cfg.y_min <= y <= 1.0:
            raise ValidationError(f"checkpoint outside [{cfg.y_min!r}, 1]: {y!r}")

    start = initial_covariance(ens, epsilon)
    labels = start.labels
    size = len(labels)
    upper = np.triu_indices(size)

    def unpack(state: Vector) -> Matrix:
        full = np.zeros((size, size))
        full[upper] = state
        full.T[upper] = state
        return full

    def derivative(y: float, state: Vector) -> Vector:
        packed: Vector = covariance_rhs(ens, epsilon, y, unpack(state))[upper]
        return packed

    state: Vector = start.entries[upper].copy()
    y = 1.0
    results: dict[float, CovarianceMatrix] = {}
    for target in sorted(set(checkpoints), reverse=True):
        steps = max(0, math.ceil((y - target) / cfg.step - 1e-9))
        h = (target - y) / steps if steps else 0.0
        for n in range(steps):
            state = _rk4_step(derivative, y, state, h)
            y = target if n == steps - 1 else y + h
            peak = float(np.max(np.abs(state)))
            if not math.isfinite(peak) or peak > INSTABILITY_BOUND:
                raise InstabilityError(
                    f"covariance entry reached {peak!r} at y={y!r} with step {cfg.step!r}"
                )
        if SETTINGS["debug"]:
            logger.debug(f"rk4 checkpoint y={target!r} after {steps} steps, eps={epsilon!r}")
        results[target] = CovarianceMatrix(labels, unpack(state), target, epsilon)
    return [results[y] for y in checkpoints]


def covariance_ode(ens: Ensemble, epsilon: float, cfg: OdeConfig) -> CovarianceMatrix:
    """
    Covariance matrix at `cfg.y_target` by numerical integration.
    """
    if not epsilon > 0.0:
        raise ValidationError(f"erasure probability must be positive: {epsilon!r}")
    return integrate_covariance(ens, epsilon, cfg, [cfg.y_target])[0]


@serde
@dataclass
class VerifyPoint:
    epsilon: float
    y: float
    max_abs_diff: float
    max_rel_diff: float
    passed: bool


@serde
@dataclass
class VerifyReport:
    """
    Agreement of the integrated and closed-form covariances over an (ε, y) grid.
    """

    step: float
    tolerance: float
    points: list[VerifyPoint]

    @property
    def max_abs_diff(self) -> float:
        return max((p.max_abs_diff for p in self.points), default=0.0)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.points)


def verify(
    ens: Ensemble, eps_grid: Sequence[float], y_grid: Sequence[float], cfg: OdeConfig
) -> VerifyReport:
    """
    Compare `integrate_covariance` against `covariance_analytic` on every grid point.

    One integration per ε covers the whole y grid.
    """
    points = []
    for epsilon in eps_grid:
        numeric = integrate_covariance(ens, epsilon, cfg, list(y_grid))
        for y, cov in zip(y_grid, numeric):
            exact = covariance_analytic(ens, epsilon, y)
            diff = np.abs(cov.entries - exact.entries)
            rel = np.divide(
                diff, np.abs(exact.entries), out=np.zeros_like(diff), where=exact.entries != 0.0
            )
            abs_diff = float(np.max(diff))
            rel_diff = float(np.max(rel))
            logger.debug(f"verify eps={epsilon!r} y={y!r}: max abs diff {abs_diff:.3e}")
            points.append(
                VerifyPoint(
                    epsilon=epsilon,
                    y=y,
                    max_abs_diff=abs_diff,
                    max_rel_diff=rel_diff,
                    passed=abs_diff <= cfg.comparison_tolerance,
                )
            )
    return VerifyReport(step=cfg.step, tolerance=cfg.comparison_tolerance, points=points)
