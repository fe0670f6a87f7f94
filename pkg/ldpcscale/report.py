"""
Machine-readable output documents.

Every JSON document starts with `"schema": 1`. CSV output writes floats with 17 significant
digits.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Protocol

import click
from serde import serde, to_dict
from serde.json import to_json

from .covariance import CovarianceMatrix, covariance_analytic
from .dde import residual_means, tau_of_y
from .ensemble import Ensemble, eval_poly
from .ode import VerifyReport
from .peeling import SimSummary, TrajectoryRecord
from .scaling import ScalingResult, WaterfallPoint

__all__ = [
    "SCHEMA_VERSION",
    "ThresholdDocument",
    "AlphaDocument",
    "EvolutionDocument",
    "CovarianceDocument",
    "VerifyDocument",
    "WaterfallDocument",
    "SimulationDocument",
    "evolution_document",
    "covariance_document",
    "simulation_document",
    "render",
    "emit",
    "write_trajectories",
]

SCHEMA_VERSION = 1

Row = list[Any]


class Tabular(Protocol):
    def table(self) -> tuple[list[str], list[Row]]: ...


@serde
@dataclass
class ThresholdDocument:
    ensemble: str
    epsilon_star: float

    def table(self) -> tuple[list[str], list[Row]]:
        return ["ensemble", "epsilon_star"], [[self.ensemble, self.epsilon_star]]


@serde
@dataclass
class AlphaDocument:
    ensemble: str
    nodes_per_edge: float
    result: ScalingResult

    def table(self) -> tuple[list[str], list[Row]]:
        r = self.result
        header = ["ensemble", "epsilon_star", "y_star", "x_star", "alpha", "alpha_normalized"]
        header += ["alpha_covariance", "alpha_regular"]
        row = [self.ensemble, r.epsilon_star, r.y_star, r.x_star, r.alpha, r.alpha_normalized]
        row += [r.alpha_covariance, r.alpha_regular]
        return header, [row]


@serde
@dataclass
class EvolutionDocument:
    ensemble: str
    epsilon: float
    columns: list[str]
    rows: list[list[float]]

    def table(self) -> tuple[list[str], list[Row]]:
        return list(self.columns), [list(r) for r in self.rows]


@serde
@dataclass
class CovarianceDocument:
    ensemble: str
    epsilon: float
    y: float
    method: str
    labels: list[str]
    matrix: list[list[float]]
    min_eigenvalue: float

    def table(self) -> tuple[list[str], list[Row]]:
        return ["label", *self.labels], [[lb, *row] for lb, row in zip(self.labels, self.matrix)]


@serde
@dataclass
class VerifyDocument:
    ensemble: str
    max_abs_diff: float
    passed: bool
    report: VerifyReport

    def table(self) -> tuple[list[str], list[Row]]:
        header = ["epsilon", "y", "max_abs_diff", "max_rel_diff", "passed"]
        rows: list[Row] = [
            [p.epsilon, p.y, p.max_abs_diff, p.max_rel_diff, p.passed] for p in self.report.points
        ]
        return header, rows


@serde
@dataclass
class WaterfallDocument:
    ensemble: str
    n: int
    epsilon_star: float
    alpha: float
    points: list[WaterfallPoint]

    def table(self) -> tuple[list[str], list[Row]]:
        return ["epsilon", "p_block"], [[p.epsilon, p.p_block] for p in self.points]


@serde
@dataclass
class TauStatistics:
    tau: float
    samples: int
    mean: Optional[dict[str, float]]
    stderr: Optional[dict[str, float]]
    covariance: Optional[list[list[float]]]


@serde
@dataclass
class SimulationDocument:
    ensemble: str
    epsilon: float
    trials: int
    seed: int
    xi: int
    block_error_rate: float
    block_error_stderr: float
    labels: list[str]
    points: list[TauStatistics]

    def table(self) -> tuple[list[str], list[Row]]:
        header = ["tau", "samples"]
        header += [f"mean_{lb}" for lb in self.labels] + [f"stderr_{lb}" for lb in self.labels]
        rows: list[Row] = []
        for p in self.points:
            mean = p.mean or {}
            err = p.stderr or {}
            rows.append(
                [p.tau, p.samples]
                + [mean.get(lb, "") for lb in self.labels]
                + [err.get(lb, "") for lb in self.labels]
            )
        return header, rows


def evolution_document(
    ens: Ensemble, epsilon: float, ys: Sequence[float], with_variance: bool = False
) -> EvolutionDocument:
    """
    Density-evolution table: y, τ(y), x, e, r̂_1, then every l̂_k and r̂_j.

    `with_variance` appends δ_{r1,r1}(y) from the closed-form covariance.
    """
    degrees = ens.lambda_.degrees
    checks = range(1, ens.dc + 1)
    columns = ["y", "tau", "x", "e", "r1_mean"]
    columns += [f"l{k}" for k in degrees] + [f"r{j}" for j in checks]
    if with_variance:
        columns.append("delta_r1_r1")
    rows = []
    for y in ys:
        mean_l, mean_r = residual_means(ens, epsilon, y)
        x = epsilon * eval_poly(ens.lambda_, y)
        row = [y, tau_of_y(ens, epsilon, y), x, x * y, mean_r[1]]
        row += [mean_l[k] for k in degrees] + [mean_r[j] for j in checks]
        if with_variance:
            row.append(covariance_analytic(ens, epsilon, y).entry("r1", "r1"))
        rows.append([float(v) for v in row])
    return EvolutionDocument(ens.describe(), epsilon, columns, rows)


def covariance_document(ens: Ensemble, cov: CovarianceMatrix, method: str) -> CovarianceDocument:
    return CovarianceDocument(
        ensemble=ens.describe(),
        epsilon=cov.epsilon,
        y=cov.y,
        method=method,
        labels=cov.names,
        matrix=cov.to_rows(),
        min_eigenvalue=cov.min_eigenvalue(),
    )


def simulation_document(
    ens: Ensemble, epsilon: float, seed: int, summary: SimSummary
) -> SimulationDocument:
    points = []
    for p, tau in enumerate(summary.tau_grid):
        mean, err, cov = summary.mean(p), summary.standard_error(p), summary.covariance(p)
        points.append(
            TauStatistics(
                tau=tau,
                samples=int(summary.samples[p]),
                mean=None if mean is None else dict(zip(summary.labels, map(float, mean))),
                stderr=None if err is None else dict(zip(summary.labels, map(float, err))),
                covariance=None if cov is None else [[float(v) for v in r] for r in cov],
            )
        )
    return SimulationDocument(
        ensemble=ens.describe(),
        epsilon=epsilon,
        trials=summary.trials,
        seed=seed,
        xi=summary.xi,
        block_error_rate=summary.block_error_rate,
        block_error_stderr=summary.block_error_stderr,
        labels=list(summary.labels),
        points=points,
    )


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def render(doc: Tabular, output_format: str = "json") -> str:
    """
    Serialize a document as JSON (with the schema version first) or CSV.
    """
    if output_format == "csv":
        header, rows = doc.table()
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_cell(v) for v in row] for row in rows)
        return buffer.getvalue()
    return to_json({"schema": SCHEMA_VERSION, **to_dict(doc)})


def emit(text: str, out: Optional[str] = None) -> None:
    if out is None:
        click.echo(text.rstrip("\n"))
        return
    Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def write_trajectories(records: Iterable[TrajectoryRecord], path: Path) -> int:
    """
    Write one JSON record per line. Returns the number of records written.
    """
    written = 0
    with path.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(to_json({"schema": SCHEMA_VERSION, **to_dict(record)}))
            f.write("\n")
            written += 1
    return written
