"""
Closed-form covariance of the residual degree counts of the peeling decoder.

Entries are δ_{X,Y}(y) = Cov[X, Y]/ξ in the large-block-length limit, indexed by
D = {l_k : k ∈ L} ∪ {r_j : 1 <= j <= d_c − 1}. Edges at degree-d_c checks are left out since
they are fixed by the others.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import numpy.typing as npt

from .core import DomainError, binomial
from .dde import EvolutionPoint, means_at
from .ensemble import Ensemble, eval_poly

__all__ = [
    "Label",
    "CovarianceMatrix",
    "AuxiliaryQuantities",
    "covariance_labels",
    "covariance_analytic",
    "initial_covariance",
    "v_term",
    "auxiliary",
    "auxiliary_from_matrix",
    "max_discrepancy",
]

Label = tuple[Literal["l", "r"], int]


def covariance_labels(ens: Ensemble) -> list[Label]:
    """
    Ordered index set D: variable degrees of λ, then check degrees 1..d_c − 1.
    """
    labels: list[Label] = [("l", k) for k in ens.lambda_.degrees]
    labels.extend(("r", j) for j in range(1, ens.dc))
    return labels


def label_name(label: Label) -> str:
    return f"{label[0]}{label[1]}"


@dataclass(eq=False)
class CovarianceMatrix:
    """
    Symmetric matrix of ξ-normalized covariances at one (ε, y).
    """

    labels: list[Label]
    entries: npt.NDArray[np.float64]
    y: float
    epsilon: float
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        size = len(self.labels)
        if self.entries.shape != (size, size):
            raise DomainError(f"matrix shape {self.entries.shape} does not match {size} labels")
        self._index = {label_name(lb): i for i, lb in enumerate(self.labels)}

    @property
    def names(self) -> list[str]:
        return [label_name(lb) for lb in self.labels]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DomainError(f"unknown covariance label {name!r}, expected one of {self.names}")

    def entry(self, a: str, b: str) -> float:
        """
        δ_{a,b} by label, e.g. `entry("l3", "r1")`.
        """
        return float(self.entries[self.index(a), self.index(b)])

    def eigenvalues(self) -> npt.NDArray[np.float64]:
        return np.linalg.eigvalsh(self.entries)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues())))

    def is_psd(self, rtol: float = 1e-8) -> bool:
        return self.min_eigenvalue() >= -rtol * max(1.0, self.spectral_radius())

    def max_abs_diff(self, other: CovarianceMatrix) -> float:
        if self.names != other.names:
            raise DomainError(f"label sets differ: {self.names} != {other.names}")
        return float(np.max(np.abs(self.entries - other.entries)))

    def to_rows(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.entries]


def v_term(ens: Ensemble, x: float, i: int, j: int) -> float:
    """
    V_{i,j} = Σ_s sρ_s C(s−1, i−1) C(s−1, j−1) x^{i+j} x̃^{2s−i−j}.
    """
    dc = ens.dc
    if not (1 <= i <= dc and 1 <= j <= dc):
        raise DomainError(f"V indices must lie in 1..{dc}: ({i}, {j})")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x outside [0, 1]: {x!r}")
    x_tilde = 1.0 - x
    return math.fsum(
        s * rho_s * binomial(s - 1, i - 1) * binomial(s - 1, j - 1)
        * x ** (i + j) * x_tilde ** (2 * s - i - j)
        for s, rho_s in ens.rho
        if s >= max(i, j)
    )


def _sum_squared_slope(ens: Ensemble, epsilon: float, y: float) -> float:
    # Σ_s ε² s λ_s y^{2s−2}
    return math.fsum(epsilon**2 * s * ls * y ** (2 * s - 2) for s, ls in ens.lambda_)


def _matrix(
    ens: Ensemble, fill: dict[tuple[Label, Label], float], y: float, eps: float
) -> CovarianceMatrix:
    labels = covariance_labels(ens)
    entries = np.empty((len(labels), len(labels)))
    for a, la in enumerate(labels):
        for b in range(a, len(labels)):
            entries[a, b] = entries[b, a] = fill[la, labels[b]]
    return CovarianceMatrix(labels, entries, y, eps)


def _pairs(ens: Ensemble) -> Iterator[tuple[Label, Label]]:
    labels = covariance_labels(ens)
    for a, la in enumerate(labels):
        for lb in labels[a:]:
            yield la, lb


def covariance_analytic(ens: Ensemble, epsilon: float, y: float) -> CovarianceMatrix:
    """
    Evaluate the closed-form solution of the covariance evolution at (ε, y).

    The formulas are evaluated wherever they are finite. For ε above threshold they only
    describe the residual graph while r̂_1 > 0.
    """
    if epsilon <= 0.0:
        raise DomainError(f"erasure probability must be positive: {epsilon!r}")
    p = means_at(ens, epsilon, y)
    x, e, F, Fp = p.x, p.e, p.F, p.F_prime
    ratio = p.x_prime / x
    ss = _sum_squared_slope(ens, epsilon, y)

    def h(j: int) -> float:
        return ratio * p.G[j] - (j == 1)

    fill: dict[tuple[Label, Label], float] = {}
    for la, lb in _pairs(ens):
        if la[0] == "l" and lb[0] == "l":
            k, s = la[1], lb[1]
            lk, ls = p.mean_l[k], p.mean_l[s]
            value = (
                -k * s * lk * ls * F / e**2
                + epsilon * lk * ls / e * (k * (y**s - 1.0) + s * (y**k - 1.0))
                + (k == s) * k * lk * (1.0 - epsilon * y**k)
            )
        elif la[0] == "l":
            s, j = la[1], lb[1]
            ls = p.mean_l[s]
            value = (F * s * ls / e - epsilon * ls * (y**s - 1.0)) * h(j) - s * ls / e * p.G[j] * (
                (Fp + x) / 2.0 - epsilon * x * y**s
            )
        else:
            i, j = la[1], lb[1]
            Gi, Gj = p.G[i], p.G[j]
            value = (
                -F * h(i) * h(j)
                + Gi * Gj * (Fp * ratio - ss + x * x)
                - v_term(ens, x, i, j)
                + ((j == 1) * Gi + (i == 1) * Gj) * (x * (e - x) - (Fp - x) / 2.0)
                + (i == j) * i * p.mean_r[i]
                + (i == j == 1) * (e - x) ** 2
            )
        fill[la, lb] = value
    return _matrix(ens, fill, y, epsilon)


def initial_covariance(ens: Ensemble, epsilon: float) -> CovarianceMatrix:
    """
    Covariances right after the channel erased each bit, at y = 1.
    """
    if not 0.0 < epsilon <= 1.0:
        raise DomainError(f"erasure probability outside (0, 1]: {epsilon!r}")
    p = means_at(ens, epsilon, 1.0)
    spread = epsilon * (1.0 - epsilon)
    lambda_slope = eval_poly(ens.lambda_, 1.0, derivative=1)

    fill: dict[tuple[Label, Label], float] = {}
    for la, lb in _pairs(ens):
        if la[0] == "l" and lb[0] == "l":
            k = la[1]
            value = (la[1] == lb[1]) * k * ens.lambda_[k] * spread
        elif la[0] == "l":
            k, i = la[1], lb[1]
            value = -k * ens.lambda_[k] * spread * p.G[i]
        else:
            i, j = la[1], lb[1]
            value = (
                (i == j) * i * p.mean_r[i]
                - v_term(ens, p.x, i, j)
                + lambda_slope * spread * p.G[i] * p.G[j]
            )
        fill[la, lb] = value
    return _matrix(ens, fill, 1.0, epsilon)


@dataclass
class AuxiliaryQuantities:
    """
    Sums and differences of covariance entries that have simple closed forms.

    * `weighted_sum`: Σ_{k,s} δ_{l_k,l_s}/(ks)
    * `pair_gap[k, s]`: 2δ_{l_k,l_s}/(ks l̂_k l̂_s) − δ_{l_k,l_k}/(k l̂_k)²
      − δ_{l_s,l_s}/(s l̂_s)²
    * `U[k, s]`: δ_{l_k,l_k}/(k l̂_k)² − δ_{l_s,l_s}/(s l̂_s)²
    * `A[j]`: Σ_k δ_{l_k,r_j}/k, and `A_sigma` = Σ_j A[j]
    * `S[k, s, j]`: δ_{l_k,r_j}/(k l̂_k) − δ_{l_s,r_j}/(s l̂_s), and `S_sigma[k, s]` = Σ_j S
    * `delta_r_sigma[j]`: Σ_i δ_{r_j,r_i}, and `delta_r_sigma_sigma` = Σ_j delta_r_sigma[j]
    * `V[i, j]`: V_{i,j}(y) for 1 <= i, j <= d_c
    """

    weighted_sum: float
    pair_gap: dict[tuple[int, int], float]
    U: dict[tuple[int, int], float]
    A: dict[int, float]
    A_sigma: float
    S: dict[tuple[int, int, int], float]
    S_sigma: dict[tuple[int, int], float]
    delta_r_sigma: dict[int, float]
    delta_r_sigma_sigma: float
    V: dict[tuple[int, int], float]


def _v_table(ens: Ensemble, x: float) -> dict[tuple[int, int], float]:
    dc = ens.dc
    return {(i, j): v_term(ens, x, i, j) for i in range(1, dc + 1) for j in range(1, dc + 1)}


def auxiliary(ens: Ensemble, epsilon: float, y: float) -> AuxiliaryQuantities:
    """
    Closed forms of the auxiliary quantities, computed without the covariance matrix.
    """
    if epsilon <= 0.0:
        raise DomainError(f"erasure probability must be positive: {epsilon!r}")
    p = means_at(ens, epsilon, y)
    x, e, F, Fp = p.x, p.e, p.F, p.F_prime
    ratio = p.x_prime / x
    ss = _sum_squared_slope(ens, epsilon, y)
    eps_tilde = 1.0 - epsilon
    degrees = ens.lambda_.degrees
    checks = range(1, ens.dc)
    dc = ens.dc
    rdc = p.mean_r[dc]
    Gs = p.G_sigma
    W = math.fsum(li / i * (y**i - 1.0) for i, li in ens.lambda_)

    def h(j: int) -> float:
        return ratio * p.G[j] - (j == 1)

    h_sigma = ratio * Gs - 1.0

    def scaled_gap(k: int) -> float:
        return (epsilon * y**k - 1.0) / (k * p.mean_l[k])

    def span(k: int, s: int) -> float:
        return (y**k - 1.0) / k - (y**s - 1.0) / s

    pair_gap = {
        (k, s): (k != s) * (scaled_gap(k) + scaled_gap(s)) for k in degrees for s in degrees
    }
    U = {
        (k, s): -scaled_gap(k) + scaled_gap(s) + 2.0 * epsilon / e * span(k, s)
        for k in degrees
        for s in degrees
    }
    A = {j: epsilon * eps_tilde * W * h(j) - eps_tilde * x * p.G[j] for j in checks}
    A_sigma = epsilon * eps_tilde * W * h_sigma - eps_tilde * x * Gs
    S = {
        (k, s, j): -epsilon * h(j) * span(k, s)
        + epsilon * p.G[j] * (y ** (k - 1) - y ** (s - 1))
        for k in degrees
        for s in degrees
        for j in checks
    }
    S_sigma = {
        (k, s): -epsilon * h_sigma * span(k, s) + epsilon * Gs * (y ** (k - 1) - y ** (s - 1))
        for k in degrees
        for s in degrees
    }
    V = _v_table(ens, x)
    delta_r_sigma = {
        j: -F * h_sigma * h(j)
        + Fp * p.G[j] * h_sigma
        - Gs * p.G[j] * ss
        + dc * rdc * x * p.G[j]
        + V[j, dc]
        + (Fp - x) / 2.0 * (p.G[j] - (j == 1) * Gs)
        + (j == 1) * dc * rdc * (e - x)
        for j in checks
    }
    delta_r_sigma_sigma = (
        -F * h_sigma**2 + Fp * Gs * h_sigma - Gs**2 * ss + dc**2 * rdc**2 - V[dc, dc]
    )
    return AuxiliaryQuantities(
        weighted_sum=epsilon * eps_tilde * ens.nodes_per_edge,
        pair_gap=pair_gap,
        U=U,
        A=A,
        A_sigma=A_sigma,
        S=S,
        S_sigma=S_sigma,
        delta_r_sigma=delta_r_sigma,
        delta_r_sigma_sigma=delta_r_sigma_sigma,
        V=V,
    )


def auxiliary_from_matrix(
    ens: Ensemble, cov: CovarianceMatrix, point: EvolutionPoint
) -> AuxiliaryQuantities:
    """
    The auxiliary quantities assembled from their definitions over matrix entries.
    """
    degrees = ens.lambda_.degrees
    checks = range(1, ens.dc)

    def d(a: str, b: str) -> float:
        return cov.entry(a, b)

    def scaled(k: int) -> float:
        return k * point.mean_l[k]

    weighted_sum = math.fsum(d(f"l{k}", f"l{s}") / (k * s) for k in degrees for s in degrees)
    pair_gap = {
        (k, s): 2.0 * d(f"l{k}", f"l{s}") / (scaled(k) * scaled(s))
        - d(f"l{k}", f"l{k}") / scaled(k) ** 2
        - d(f"l{s}", f"l{s}") / scaled(s) ** 2
        for k in degrees
        for s in degrees
    }
    U = {
        (k, s): d(f"l{k}", f"l{k}") / scaled(k) ** 2 - d(f"l{s}", f"l{s}") / scaled(s) ** 2
        for k in degrees
        for s in degrees
    }
    A = {j: math.fsum(d(f"l{k}", f"r{j}") / k for k in degrees) for j in checks}
    S = {
        (k, s, j): d(f"l{k}", f"r{j}") / scaled(k) - d(f"l{s}", f"r{j}") / scaled(s)
        for k in degrees
        for s in degrees
        for j in checks
    }
    S_sigma = {
        (k, s): math.fsum(S[k, s, j] for j in checks) for k in degrees for s in degrees
    }
    delta_r_sigma = {j: math.fsum(d(f"r{j}", f"r{i}") for i in checks) for j in checks}
    return AuxiliaryQuantities(
        weighted_sum=weighted_sum,
        pair_gap=pair_gap,
        U=U,
        A=A,
        A_sigma=math.fsum(A.values()),
        S=S,
        S_sigma=S_sigma,
        delta_r_sigma=delta_r_sigma,
        delta_r_sigma_sigma=math.fsum(delta_r_sigma.values()),
        V=_v_table(ens, point.x),
    )


def max_discrepancy(a: AuxiliaryQuantities, b: AuxiliaryQuantities) -> float:
    """
    Largest absolute difference between two sets of auxiliary quantities.
    """
    diffs = [abs(a.weighted_sum - b.weighted_sum), abs(a.A_sigma - b.A_sigma)]
    diffs.append(abs(a.delta_r_sigma_sigma - b.delta_r_sigma_sigma))
    for name in ("pair_gap", "U", "A", "S", "S_sigma", "delta_r_sigma", "V"):
        left, right = getattr(a, name), getattr(b, name)
        diffs.extend(abs(left[key] - right[key]) for key in left)
    return max(diffs)
