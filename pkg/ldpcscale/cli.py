"""
ldpcscale command line.

#### Usage

```
$ ldpcscale [-v] COMMAND --lambda 3:1 --rho 6:1 [OPTIONS]

 COMMAND  threshold | evolve | covariance | verify | alpha | waterfall | simulate
```

Every option can also be set through an environment variable named
`LDPCSCALE_<COMMAND>_<OPTION>`, e.g. `LDPCSCALE_SIMULATE_TRIALS=500`.

Exit codes: 0 success, 1 unknown command, 2 invalid input, 3 numerical failure,
4 `verify` disagreement above tolerance.
"""

from __future__ import annotations

import functools
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, Optional

import click
import numpy as np
from serde import SerdeError

from .config import JobConfig
from .core import NumericalError, ScalingError, ValidationError, init, logger
from .covariance import covariance_analytic, initial_covariance
from .ode import OdeConfig, covariance_ode, verify
from .peeling import SimSummary, simulate_trials
from .report import (
    AlphaDocument,
    ThresholdDocument,
    VerifyDocument,
    WaterfallDocument,
    covariance_document,
    emit,
    evolution_document,
    render,
    simulation_document,
    write_trajectories,
)
from .scaling import alpha, threshold, waterfall

__all__ = ["cli", "run", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY_FAILED = 4

ENV_PREFIX = "LDPCSCALE"


def parse_floats(text: str, what: str) -> list[float]:
    """
    Parse `"a,b,c"` into floats.
    """
    values = []
    for token in text.split(","):
        try:
            values.append(float(token))
        except ValueError:
            raise ValidationError(f"malformed {what} value {token.strip()!r}")
    return values


def parse_range(text: str, what: str) -> list[float]:
    """
    Parse `"lo:hi:steps"` into `steps` evenly spaced floats from lo to hi.
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"{what} range must be lo:hi:steps, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValidationError(f"malformed {what} range {text!r}")
    if steps < 1:
        raise ValidationError(f"{what} range needs at least one step: {text!r}")
    return [float(v) for v in np.linspace(lo, hi, steps)]


def grid_option(grid: Optional[str], span: Optional[str], what: str) -> list[float]:
    if grid is not None and span is not None:
        raise ValidationError(f"give either a {what} list or a {what} range, not both")
    if grid is not None:
        return parse_floats(grid, what)
    if span is not None:
        return parse_range(span, what)
    raise ValidationError(f"a {what} list or range is required")


def ensemble_options(f: Callable[..., int]) -> Callable[..., int]:
    """
    Options shared by every command. The wrapped command receives a `JobConfig`.
    """

    @click.option("--lambda", "lambda_text", help="Variable degrees, e.g. 2:0.5,3:0.5.")
    @click.option("--rho", "rho_text", help="Check degrees, e.g. 6:1.")
    @click.option(
        "--ensemble",
        "ensemble_path",
        type=click.Path(dir_okay=False),
        help="Ensemble file (.json, .toml, .yaml).",
    )
    @click.option("--n", "n", type=int, default=None, help="Block length.")
    @click.option("--normalize", is_flag=True, default=False, help="Rescale coefficients to 1.")
    @click.option(
        "--format",
        "output_format",
        type=click.Choice(["json", "csv"]),
        default="json",
        show_default=True,
    )
    @click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file.")
    @click.pass_context
    @functools.wraps(f)
    def wrapper(ctx: click.Context, **kwargs: Any) -> int:
        job = JobConfig(
            command=ctx.info_name or f.__name__,
            lambda_text=kwargs.pop("lambda_text"),
            rho_text=kwargs.pop("rho_text"),
            ensemble_path=kwargs.pop("ensemble_path"),
            n=kwargs.pop("n"),
            normalize=kwargs.pop("normalize"),
            output_format=kwargs.pop("output_format"),
            out=kwargs.pop("out"),
            threads=kwargs.pop("threads", 0),
        )
        return f(job, **kwargs)

    return wrapper


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", is_flag=True, default=False, help="Enable debug logging.")
def cli(verbose: bool) -> None:
    """
    Finite-length scaling analysis of LDPC ensembles on the binary erasure channel.
    """
    if verbose:
        logging.basicConfig(level=logging.DEBUG)
        init(True)


def _publish(job: JobConfig, doc: Any) -> int:
    emit(render(doc, job.output_format), job.out)
    return EXIT_OK


@cli.command("threshold")
@ensemble_options
def threshold_command(job: JobConfig) -> int:
    """BP threshold ε*."""
    ens = job.ensemble()
    return _publish(job, ThresholdDocument(ens.describe(), threshold(ens)))


@cli.command("alpha")
@ensemble_options
def alpha_command(job: JobConfig) -> int:
    """Threshold, critical point and slope scaling parameter α."""
    ens = job.ensemble()
    return _publish(job, AlphaDocument(ens.describe(), ens.nodes_per_edge, alpha(ens)))


@cli.command("evolve")
@ensemble_options
@click.option("--epsilon", type=float, required=True)
@click.option("--y-grid", default=None, help="Comma-separated y values.")
@click.option("--y-range", default=None, help="lo:hi:steps.")
@click.option("--with-variance", is_flag=True, default=False, help="Add δ_{r1,r1}(y).")
def evolve_command(
    job: JobConfig,
    epsilon: float,
    y_grid: Optional[str],
    y_range: Optional[str],
    with_variance: bool,
) -> int:
    """Density-evolution means along a y grid."""
    ens = job.ensemble()
    ys = grid_option(y_grid, y_range, "y")
    return _publish(job, evolution_document(ens, epsilon, ys, with_variance))


@cli.command("covariance")
@ensemble_options
@click.option("--epsilon", type=float, required=True)
@click.option("--y", "y", type=float, required=True)
@click.option(
    "--method", type=click.Choice(["analytic", "ode"]), default="analytic", show_default=True
)
@click.option("--step", type=float, default=1e-4, show_default=True, help="RK4 step in y.")
def covariance_command(job: JobConfig, epsilon: float, y: float, method: str, step: float) -> int:
    """Covariance matrix of the residual degree counts at (ε, y)."""
    ens = job.ensemble()
    if method == "analytic":
        cov = covariance_analytic(ens, epsilon, y)
    elif y == 1.0:
        cov = initial_covariance(ens, epsilon)
    else:
        cov = covariance_ode(ens, epsilon, OdeConfig(y_target=y, step=step))
    return _publish(job, covariance_document(ens, cov, method))


@cli.command("verify")
@ensemble_options
@click.option("--epsilon", "--eps-grid", "eps_grid", required=True, help="ε values, a,b,c.")
@click.option("--y", "--y-grid", "y_grid", required=True, help="y values, a,b,c.")
@click.option("--step", type=float, default=1e-4, show_default=True)
@click.option("--tolerance", type=float, default=1e-5, show_default=True)
def verify_command(
    job: JobConfig, eps_grid: str, y_grid: str, step: float, tolerance: float
) -> int:
    """Compare the integrated and closed-form covariances."""
    ens = job.ensemble()
    epsilons = parse_floats(eps_grid, "epsilon")
    ys = parse_floats(y_grid, "y")
    target = min(ys)
    cfg = OdeConfig(
        y_target=min(target, 1.0 - step), step=step, comparison_tolerance=tolerance
    )
    report = verify(ens, epsilons, ys, cfg)
    _publish(job, VerifyDocument(ens.describe(), report.max_abs_diff, report.passed, report))
    if not report.passed:
        logger.warning(f"max abs difference {report.max_abs_diff!r} exceeds {tolerance!r}")
        return EXIT_VERIFY_FAILED
    return EXIT_OK


@cli.command("waterfall")
@ensemble_options
@click.option("--eps", "eps_list", default=None, help="ε values, a,b,c.")
@click.option("--eps-range", default=None, help="lo:hi:steps.")
def waterfall_command(job: JobConfig, eps_list: Optional[str], eps_range: Optional[str]) -> int:
    """Predicted block error probability Q(√n (ε* − ε)/α)."""
    ens = job.ensemble()
    n = ens.require_n()
    epsilons = grid_option(eps_list, eps_range, "epsilon")
    scaling = alpha(ens)
    points = waterfall(ens, epsilons, n=n, result=scaling)
    doc = WaterfallDocument(ens.describe(), n, scaling.epsilon_star, scaling.alpha, points)
    return _publish(job, doc)


@cli.command("simulate")
@ensemble_options
@click.option("--epsilon", type=float, required=True)
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tau-grid", default="", help="τ values, a,b,c.")
@click.option(
    "--record-trajectories",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write every trial as newline-delimited JSON.",
)
@click.option("--threads", type=int, default=0, show_default=True, help="0 = one per CPU.")
def simulate_command(
    job: JobConfig,
    epsilon: float,
    trials: int,
    seed: int,
    tau_grid: str,
    record_trajectories: Optional[str],
) -> int:
    """Monte Carlo peeling decoder."""
    ens = job.ensemble()
    ens.require_n()
    grid = parse_floats(tau_grid, "tau") if tau_grid.strip() else []
    records = simulate_trials(ens, epsilon, trials, seed, grid, threads=job.threads)
    summary = SimSummary.empty(ens, grid)
    if record_trajectories is None:
        for record in records:
            summary.add(record)
    else:

        def collect() -> Any:
            for record in records:
                summary.add(record)
                yield record

        write_trajectories(collect(), Path(record_trajectories))
    return _publish(job, simulation_document(ens, epsilon, seed, summary))


def _command_name(args: Sequence[str]) -> Optional[str]:
    for arg in args:
        if arg in ("-v", "--verbose"):
            continue
        if arg.startswith("-"):
            return None
        return arg
    return None


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command line and return its exit code.
    """
    args = list(sys.argv[1:] if argv is None else argv)
    if any(a in ("-h", "--help") for a in args[:1]):
        click.echo(cli.get_help(click.Context(cli, info_name="ldpcscale")))
        return EXIT_OK
    name = _command_name(args)
    if name is None or name not in cli.commands:
        ctx = click.Context(cli, info_name="ldpcscale")
        if name is not None:
            click.echo(f"Error: unknown command {name!r}", err=True)
        click.echo(cli.get_help(ctx), err=True)
        return EXIT_USAGE
    try:
        rv = cli.main(
            args=args,
            prog_name="ldpcscale",
            standalone_mode=False,
            auto_envvar_prefix=ENV_PREFIX,
        )
    except click.ClickException as e:
        e.show()
        return EXIT_INVALID
    except (ValidationError, SerdeError) as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_INVALID
    except NumericalError as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_NUMERICAL
    except ScalingError as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_USAGE
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    return rv if isinstance(rv, int) else EXIT_OK


def main() -> None:
    sys.exit(run())
