"""
Irregular LDPC ensembles: edge-perspective degree distributions, polynomial evaluation and the
integer node counts of a finite-length realization.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt

from .core import DomainError, EnsembleError, InfeasibleError, ValidationError, logger

__all__ = [
    "DegreeDistribution",
    "Ensemble",
    "EnsembleCounts",
    "eval_poly",
    "poly_values",
    "counts",
    "parse_degree_spec",
]

# Allowed deviation of Σ coefficients from 1.
NORMALIZATION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DegreeDistribution:
    """
    Edge-perspective degree polynomial, e.g. λ(x) = Σ λ_i x^(i-1).

    `coeffs` maps a degree (>= 2) to the fraction of edges attached to nodes of that degree.
    Degrees that are absent have coefficient zero.

    >>> DegreeDistribution({3: 1.0}).max_degree
    3
    """

    coeffs: Mapping[int, float]

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise EnsembleError("degree distribution is empty")
        for degree, coeff in self.coeffs.items():
            if isinstance(degree, bool) or not isinstance(degree, int):
                raise EnsembleError(f"degree must be an integer: {degree!r}", token=str(degree))
            if degree < 2:
                raise EnsembleError(f"degree must be >= 2: {degree}", token=str(degree))
            if not math.isfinite(coeff) or coeff <= 0.0:
                raise EnsembleError(
                    f"coefficient of degree {degree} must be positive: {coeff!r}",
                    token=f"{degree}:{coeff}",
                )
        total = math.fsum(self.coeffs.values())
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            text = ",".join(f"{d}:{c!r}" for d, c in self.coeffs.items())
            raise EnsembleError(f"coefficients {text} sum to {total!r}, expected 1", token=text)
        object.__setattr__(self, "coeffs", {d: float(self.coeffs[d]) for d in sorted(self.coeffs)})

    @classmethod
    def from_mapping(
        cls, coeffs: Mapping[int, float], normalize: bool = False
    ) -> DegreeDistribution:
        """
        Build a distribution, optionally rescaling the coefficients to sum to one.
        """
        if normalize:
            total = math.fsum(coeffs.values())
            if not math.isfinite(total) or total <= 0.0:
                raise EnsembleError(f"cannot normalize coefficients summing to {total!r}")
            coeffs = {d: c / total for d, c in coeffs.items()}
        return cls(dict(coeffs))

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return iter(self.coeffs.items())

    def __len__(self) -> int:
        return len(self.coeffs)

    def __contains__(self, degree: object) -> bool:
        return degree in self.coeffs

    def __getitem__(self, degree: int) -> float:
        return self.coeffs.get(degree, 0.0)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(self.coeffs)

    @property
    def max_degree(self) -> int:
        return max(self.coeffs)

    @property
    def min_degree(self) -> int:
        return min(self.coeffs)

    @property
    def inverse_moment(self) -> float:
        """
        Σ c_i / i, the number of nodes per edge.
        """
        return math.fsum(c / d for d, c in self.coeffs.items())

    def to_text(self) -> str:
        return ",".join(f"{d}:{c!r}" for d, c in self.coeffs.items())


def eval_poly(d: DegreeDistribution, x: float, derivative: int = 0) -> float:
    """
    Evaluate Σ c_i x^(i-1) or its first or second derivative at x in [0, 1].

    >>> eval_poly(DegreeDistribution({3: 1.0}), 0.5)
    0.25
    >>> eval_poly(DegreeDistribution({6: 1.0}), 1.0, derivative=1)
    5.0
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"polynomial argument outside [0, 1]: {x!r}")
    if derivative not in (0, 1, 2):
        raise DomainError(f"derivative order must be 0, 1 or 2: {derivative!r}")
    terms = []
    for degree, coeff in d:
        power = degree - 1 - derivative
        factor = float(math.perm(degree - 1, derivative))
        if factor == 0.0:
            continue
        terms.append(coeff * factor * x**power)
    return math.fsum(terms)


def poly_values(
    d: DegreeDistribution, xs: npt.NDArray[np.float64], derivative: int = 0
) -> npt.NDArray[np.float64]:
    """
    Vectorized `eval_poly` for grid scans. Arguments are not range checked.
    """
    out = np.zeros_like(xs, dtype=np.float64)
    for degree, coeff in d:
        factor = math.perm(degree - 1, derivative)
        if factor:
            out += coeff * factor * xs ** (degree - 1 - derivative)
    return out


@dataclass(frozen=True)
class Ensemble:
    """
    LDPC ensemble (λ, ρ) with an optional block length.

    Asymptotic analyses ignore `n`; finite-length operations (graph sampling, block error
    prediction) require it.
    """

    lambda_: DegreeDistribution
    rho: DegreeDistribution
    n: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n is not None and (isinstance(self.n, bool) or self.n <= 0):
            raise ValidationError(f"block length must be a positive integer: {self.n!r}")
        rate = self.design_rate
        if not 0.0 < rate < 1.0:
            raise EnsembleError(f"design rate must lie in (0, 1): {rate!r}")

    @classmethod
    def regular(cls, dv: int, dc: int, n: Optional[int] = None) -> Ensemble:
        return cls(DegreeDistribution({dv: 1.0}), DegreeDistribution({dc: 1.0}), n)

    def with_n(self, n: Optional[int]) -> Ensemble:
        return dataclasses.replace(self, n=n)

    @property
    def nodes_per_edge(self) -> float:
        """
        Σ_{i∈L} λ_i / i, that is n / ξ.
        """
        return self.lambda_.inverse_moment

    @property
    def checks_per_edge(self) -> float:
        return self.rho.inverse_moment

    @property
    def design_rate(self) -> float:
        return 1.0 - self.checks_per_edge / self.nodes_per_edge

    @property
    def dc(self) -> int:
        """
        Maximum check degree.
        """
        return self.rho.max_degree

    @property
    def is_regular(self) -> bool:
        return len(self.lambda_) == 1 and len(self.rho) == 1

    @property
    def variable_degree(self) -> int:
        if len(self.lambda_) != 1:
            raise ValidationError("variable degree is only defined for regular ensembles")
        return self.lambda_.min_degree

    @property
    def check_degree(self) -> int:
        if len(self.rho) != 1:
            raise ValidationError("check degree is only defined for regular ensembles")
        return self.rho.min_degree

    def require_n(self) -> int:
        if self.n is None:
            raise ValidationError("this operation needs a block length n")
        return self.n

    @property
    def xi(self) -> float:
        """
        Edge count n / Σ λ_i / i of the ensemble's block length.
        """
        return self.require_n() / self.nodes_per_edge

    def describe(self) -> str:
        n = "" if self.n is None else f", n={self.n}"
        return f"λ={{{self.lambda_.to_text()}}}, ρ={{{self.rho.to_text()}}}{n}"


@dataclass(frozen=True)
class EnsembleCounts:
    """
    Integer realization of an ensemble.
    """

    xi: int
    variable_nodes: dict[int, int]
    check_nodes: dict[int, int]

    @property
    def n(self) -> int:
        return sum(self.variable_nodes.values())

    @property
    def m(self) -> int:
        return sum(self.check_nodes.values())


def _largest_remainder(total: int, weights: Mapping[int, float]) -> dict[int, int]:
    norm = math.fsum(weights.values())
    shares = {d: total * w / norm for d, w in weights.items()}
    result = {d: math.floor(s) for d, s in shares.items()}
    missing = total - sum(result.values())
    # largest fractional part first, ties toward the lower degree
    order = sorted(shares, key=lambda d: (-(shares[d] - result[d]), d))
    for d in order[:missing]:
        result[d] += 1
    return result


def _edges(nodes: Mapping[int, int]) -> int:
    return sum(d * c for d, c in nodes.items())


def counts(e: Ensemble) -> EnsembleCounts:
    """
    Node counts per degree for block length `e.n`.

    Both sides are rounded with the largest-remainder method. The check side is then corrected
    so that its edge total equals the variable side's: first whole nodes of the highest check
    degree are added or removed, then a remainder smaller than d_c is absorbed by moving checks
    between two degrees of ρ, possibly after adding one more degree-d_c check.
    """
    n = e.require_n()
    lam = {d: c / d for d, c in e.lambda_}
    rho = {d: c / d for d, c in e.rho}
    variables = _largest_remainder(n, lam)
    xi = _edges(variables)
    m = round(xi * e.checks_per_edge)
    if m <= 0:
        raise InfeasibleError(f"block length {n} yields no check nodes")
    checks = _largest_remainder(m, rho)

    dc = e.dc
    quotient, remainder = divmod(xi - _edges(checks), dc)
    checks[dc] += quotient
    if remainder:
        checks = _absorb_remainder(checks, remainder, dc, n)
    if checks[dc] < 0 or any(c < 0 for c in checks.values()):
        raise InfeasibleError(f"cannot equalize edge totals for n={n}: {checks}")
    if _edges(checks) != xi:
        raise InfeasibleError(f"edge totals differ for n={n}: {xi} != {_edges(checks)}")

    logger.debug(f"counts for n={n}: xi={xi} variables={variables} checks={checks}")
    return EnsembleCounts(
        xi=xi,
        variable_nodes={d: c for d, c in variables.items() if c > 0},
        check_nodes={d: c for d, c in checks.items() if c > 0},
    )


def _absorb_remainder(checks: dict[int, int], remainder: int, dc: int, n: int) -> dict[int, int]:
    # Either move checks up to gain `remainder` edges, or add one degree-d_c check and move
    # checks down to shed dc - remainder. The plan touching the fewest nodes wins.
    plans = []
    for extra, need in ((0, remainder), (1, remainder - dc)):
        for low in checks:
            for high in checks:
                gap = high - low
                if gap <= 0 or abs(need) % gap:
                    continue
                moves = abs(need) // gap
                source = low if need > 0 else high
                available = checks[source] + (extra if source == dc else 0)
                if moves <= available:
                    plans.append((moves + extra, extra, low, high, moves, need > 0))
    if not plans:
        raise InfeasibleError(
            f"cannot equalize edge totals for n={n}: {remainder} edges left over with check "
            f"degrees {sorted(checks)}"
        )
    _, extra, low, high, moves, upward = min(plans)
    moved = dict(checks)
    moved[dc] += extra
    source, target = (low, high) if upward else (high, low)
    moved[source] -= moves
    moved[target] += moves
    return moved


def parse_degree_spec(text: str, normalize: bool = False) -> DegreeDistribution:
    """
    Parse a `degree:coefficient` list such as `"2:0.5,3:0.5"`.
    """
    coeffs: dict[int, float] = {}
    tokens = [t.strip() for t in text.split(",")]
    if not text.strip():
        raise EnsembleError("empty degree specification", token=text)
    for token in tokens:
        degree_text, sep, coeff_text = token.partition(":")
        if not sep:
            raise EnsembleError(f"expected degree:coefficient, got {token!r}", token=token)
        try:
            degree = int(degree_text)
            coeff = float(coeff_text)
        except ValueError:
            raise EnsembleError(f"malformed degree token {token!r}", token=token)
        if degree in coeffs:
            raise EnsembleError(f"degree {degree} listed twice", token=token)
        coeffs[degree] = coeff
    return DegreeDistribution.from_mapping(coeffs, normalize=normalize)
