"""
ldpcscale computes the finite-length scaling analysis of LDPC ensembles on the binary erasure
channel: density evolution, the covariance of the peeling decoder's residual graph, the slope
scaling parameter α and waterfall predictions, with a Monte Carlo peeling decoder to check them.

```python
>>> from ldpcscale import Ensemble, alpha
>>> result = alpha(Ensemble.regular(3, 6))
>>> round(result.epsilon_star, 4)
0.4294
```
"""

from .core import (
    DegenerateMinimumError,
    DomainError,
    EnsembleError,
    InfeasibleError,
    InstabilityError,
    NumericalError,
    RangeError,
    ScalingError,
    SingularityError,
    ValidationError,
    init,
    logger,
)
from .covariance import (
    AuxiliaryQuantities,
    CovarianceMatrix,
    auxiliary,
    auxiliary_from_matrix,
    covariance_analytic,
    initial_covariance,
    v_term,
)
from .dde import EvolutionPoint, means_at, r1_slope, residual_means, tau_of_y, y_of_tau
from .ensemble import (
    DegreeDistribution,
    Ensemble,
    EnsembleCounts,
    counts,
    eval_poly,
    parse_degree_spec,
)
from .ode import (
    OdeConfig,
    VerifyReport,
    covariance_ode,
    covariance_rhs,
    integrate_covariance,
    verify,
)
from .peeling import (
    SimSummary,
    TannerGraph,
    TrajectoryRecord,
    TrajectorySample,
    peel,
    sample_graph,
    simulate,
    simulate_trials,
)
from .scaling import ScalingResult, alpha, critical_point, q_function, threshold, waterfall

__all__ = [
    "init",
    "logger",
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
    "DegreeDistribution",
    "Ensemble",
    "EnsembleCounts",
    "eval_poly",
    "counts",
    "parse_degree_spec",
    "EvolutionPoint",
    "means_at",
    "residual_means",
    "tau_of_y",
    "y_of_tau",
    "r1_slope",
    "CovarianceMatrix",
    "AuxiliaryQuantities",
    "covariance_analytic",
    "initial_covariance",
    "v_term",
    "auxiliary",
    "auxiliary_from_matrix",
    "OdeConfig",
    "VerifyReport",
    "covariance_ode",
    "covariance_rhs",
    "integrate_covariance",
    "verify",
    "ScalingResult",
    "threshold",
    "critical_point",
    "alpha",
    "q_function",
    "waterfall",
    "TannerGraph",
    "TrajectorySample",
    "TrajectoryRecord",
    "SimSummary",
    "sample_graph",
    "peel",
    "simulate",
    "simulate_trials",
]
