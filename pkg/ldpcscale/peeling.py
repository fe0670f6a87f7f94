"""
Monte Carlo peeling decoder on configuration-model Tanner graphs.

Seeding
-------
Trial `i` of a run with base seed `s` uses the 64-bit seed
`SeedSequence([s, i]).generate_state(1, uint64)[0]`. A trial seed `t` drives two PCG64 streams:
`SeedSequence([t, 0])` shuffles the graph sockets and `SeedSequence([t, 1])` draws the
erasures and the degree-one check choices. Results do not depend on the number of workers.
"""

from __future__ import annotations

import math
import os
from collections.abc import Iterable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt
from serde import serde

from .core import SETTINGS, DomainError, ValidationError, logger
from .ensemble import Ensemble, counts

__all__ = [
    "TannerGraph",
    "TrajectorySample",
    "TrajectoryRecord",
    "SimSummary",
    "trial_seed",
    "sample_graph",
    "peel",
    "simulate_trials",
    "simulate",
]

GRAPH_STREAM = 0
DECODER_STREAM = 1

# Uniform draws fetched from the generator at a time.
DRAW_BATCH = 4096

IntArray = npt.NDArray[np.int64]


def _generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def trial_seed(base_seed: int, trial_id: int) -> int:
    """
    64-bit seed of trial `trial_id`, mixed from `base_seed` by NumPy's SeedSequence hash.
    """
    if base_seed < 0 or trial_id < 0:
        raise DomainError(f"seeds must be non-negative: {base_seed!r}, {trial_id!r}")
    return int(np.random.SeedSequence([base_seed, trial_id]).generate_state(1, np.uint64)[0])


@dataclass(eq=False)
class TannerGraph:
    """
    Bipartite graph as an edge list. Edge `e` joins variable `edge_var[e]` and check
    `edge_check[e]`; edges are sorted by variable, so the edges of variable `v` are
    `var_start[v]:var_start[v + 1]`. Multi-edges may occur.
    """

    var_degrees: IntArray
    check_degrees: IntArray
    edge_var: IntArray
    edge_check: IntArray
    var_start: IntArray

    @property
    def n(self) -> int:
        return len(self.var_degrees)

    @property
    def m(self) -> int:
        return len(self.check_degrees)

    @property
    def edges(self) -> int:
        return len(self.edge_var)

    def adjacency(self) -> list[tuple[int, int]]:
        return list(zip(self.edge_var.tolist(), self.edge_check.tolist()))


def _degree_sequence(nodes: dict[int, int]) -> IntArray:
    return np.repeat(np.array(list(nodes), dtype=np.int64), list(nodes.values()))


def sample_graph(ens: Ensemble, seed: int) -> TannerGraph:
    """
    Configuration-model graph: variable sockets are paired with a uniformly shuffled list of
    check sockets.
    """
    realized = counts(ens)
    var_degrees = _degree_sequence(realized.variable_nodes)
    check_degrees = _degree_sequence(realized.check_nodes)
    edge_var = np.repeat(np.arange(len(var_degrees), dtype=np.int64), var_degrees)
    check_sockets = np.repeat(np.arange(len(check_degrees), dtype=np.int64), check_degrees)
    edge_check = _generator(seed, GRAPH_STREAM).permutation(check_sockets)
    var_start = np.zeros(len(var_degrees) + 1, dtype=np.int64)
    np.cumsum(var_degrees, out=var_start[1:])
    return TannerGraph(var_degrees, check_degrees, edge_var, edge_check, var_start)


@serde
@dataclass
class TrajectorySample:
    """
    Residual graph at the first iteration `t` with t/ξ >= `tau`. Counts are edges, keyed by
    the degree of the node they attach to.
    """

    tau: float
    t: int
    r_counts: dict[str, int]
    l_counts: dict[str, int]


@serde
@dataclass
class TrajectoryRecord:
    trial_id: int
    seed: int
    samples: list[Optional[TrajectorySample]]
    success: bool
    residual_at_halt: int
    iterations: int


class _DegreeOnePool:
    """
    Set of check indices with O(1) insertion, removal and uniform sampling.
    """

    def __init__(self, size: int) -> None:
        self.items: list[int] = []
        self.pos = [-1] * size

    def __len__(self) -> int:
        return len(self.items)

    def add(self, c: int) -> None:
        self.pos[c] = len(self.items)
        self.items.append(c)

    def remove(self, c: int) -> None:
        i = self.pos[c]
        last = self.items.pop()
        if last != c:
            self.items[i] = last
            self.pos[last] = i
        self.pos[c] = -1

    def pick(self, u: float) -> int:
        return self.items[int(u * len(self.items))]


def _validate_grid(tau_grid: Sequence[float], tau_max: float) -> None:
    if any(b < a for a, b in zip(tau_grid, tau_grid[1:])):
        raise DomainError(f"tau grid must be sorted ascending: {list(tau_grid)}")
    for tau in tau_grid:
        if not 0.0 <= tau <= tau_max:
            raise DomainError(f"tau={tau!r} outside [0, {tau_max!r}]")


def peel(
    graph: TannerGraph,
    epsilon: float,
    seed: int,
    tau_grid: Sequence[float],
    trial_id: int = 0,
) -> TrajectoryRecord:
    """
    Erase every variable with probability ε and run the peeling decoder.

    Each iteration resolves the variable behind a uniformly chosen degree-one check and removes
    it with all its edges. The state is recorded the first time t/ξ reaches each grid point.
    If decoding halts first, the halted state fills the next grid point and the remaining ones
    stay empty.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"erasure probability outside [0, 1]: {epsilon!r}")
    xi = graph.edges
    _validate_grid(tau_grid, graph.n / xi)

    rng = _generator(seed, DECODER_STREAM)
    erased = rng.random(graph.n) < epsilon
    mask = erased[graph.edge_var]
    m = graph.m
    check_deg = np.bincount(graph.edge_check[mask], minlength=m).tolist()
    check_sum = np.bincount(
        graph.edge_check[mask], weights=graph.edge_var[mask], minlength=m
    ).astype(np.int64).tolist()
    dc = int(graph.check_degrees.max())
    dv = int(graph.var_degrees.max())
    check_hist = np.bincount(np.asarray(check_deg, dtype=np.int64), minlength=dc + 1).tolist()
    var_hist = np.bincount(graph.var_degrees[erased], minlength=dv + 1).tolist()
    var_levels = sorted({int(d) for d in graph.var_degrees})
    unknown = int(erased.sum())

    pool = _DegreeOnePool(m)
    for c, d in enumerate(check_deg):
        if d == 1:
            pool.add(c)

    edge_check = graph.edge_check.tolist()
    var_start = graph.var_start.tolist()
    var_degrees = graph.var_degrees.tolist()

    def snapshot(tau: float, t: int) -> TrajectorySample:
        return TrajectorySample(
            tau=tau,
            t=t,
            r_counts={str(j): j * check_hist[j] for j in range(1, dc + 1)},
            l_counts={str(k): k * var_hist[k] for k in var_levels},
        )

    samples: list[Optional[TrajectorySample]] = [None] * len(tau_grid)
    next_point = 0
    t = 0
    draws = rng.random(DRAW_BATCH).tolist()
    used = 0
    while True:
        while next_point < len(tau_grid) and t / xi >= tau_grid[next_point]:
            samples[next_point] = snapshot(tau_grid[next_point], t)
            next_point += 1
        if not pool:
            break
        if used == len(draws):
            draws = rng.random(DRAW_BATCH).tolist()
            used = 0
        c = pool.pick(draws[used])
        used += 1
        v = check_sum[c]
        for edge in range(var_start[v], var_start[v + 1]):
            c2 = edge_check[edge]
            d = check_deg[c2]
            check_hist[d] -= 1
            check_hist[d - 1] += 1
            check_deg[c2] = d - 1
            check_sum[c2] -= v
            if d == 1:
                pool.remove(c2)
            elif d == 2:
                pool.add(c2)
        var_hist[var_degrees[v]] -= 1
        unknown -= 1
        t += 1

    if next_point < len(tau_grid):
        samples[next_point] = snapshot(tau_grid[next_point], t)
    residual = sum(k * var_hist[k] for k in var_levels)
    if SETTINGS["debug"]:
        logger.debug(
            f"trial {trial_id}: halted after {t} iterations, {unknown} unknown variables"
        )
    return TrajectoryRecord(
        trial_id=trial_id,
        seed=seed,
        samples=samples,
        success=unknown == 0,
        residual_at_halt=residual,
        iterations=t,
    )


@dataclass(eq=False)
class SimSummary:
    """
    Exact integer sums over trials, per τ grid point.

    `sums[p]` is Σ x and `products[p]` is Σ x xᵀ over the trials that have a sample at grid
    point `p`, where x lists the residual edge counts in `labels` order. `merge` adds two
    summaries of the same configuration, so aggregation is associative and order independent.
    """

    xi: int
    labels: list[str]
    tau_grid: list[float]
    trials: int
    failures: int
    samples: IntArray
    sums: IntArray
    products: IntArray

    @classmethod
    def empty(cls, ens: Ensemble, tau_grid: Sequence[float]) -> SimSummary:
        labels = [f"l{k}" for k in ens.lambda_.degrees]
        labels.extend(f"r{j}" for j in range(1, ens.dc + 1))
        size, points = len(labels), len(tau_grid)
        return cls(
            xi=counts(ens).xi,
            labels=labels,
            tau_grid=[float(t) for t in tau_grid],
            trials=0,
            failures=0,
            samples=np.zeros(points, dtype=np.int64),
            sums=np.zeros((points, size), dtype=np.int64),
            products=np.zeros((points, size, size), dtype=np.int64),
        )

    def add(self, record: TrajectoryRecord) -> None:
        self.trials += 1
        self.failures += not record.success
        for p, sample in enumerate(record.samples):
            if sample is None:
                continue
            # degrees absent from a small realized graph have no residual edges
            x = np.array(
                [
                    (sample.l_counts if lb[0] == "l" else sample.r_counts).get(lb[1:], 0)
                    for lb in self.labels
                ],
                dtype=np.int64,
            )
            self.samples[p] += 1
            self.sums[p] += x
            self.products[p] += np.outer(x, x)

    def merge(self, other: SimSummary) -> SimSummary:
        if (self.xi, self.labels, self.tau_grid) != (other.xi, other.labels, other.tau_grid):
            raise ValidationError("cannot merge summaries of different configurations")
        return SimSummary(
            xi=self.xi,
            labels=list(self.labels),
            tau_grid=list(self.tau_grid),
            trials=self.trials + other.trials,
            failures=self.failures + other.failures,
            samples=self.samples + other.samples,
            sums=self.sums + other.sums,
            products=self.products + other.products,
        )

    @property
    def block_error_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def block_error_stderr(self) -> float:
        if not self.trials:
            return 0.0
        p = self.block_error_rate
        return math.sqrt(p * (1.0 - p) / self.trials)

    def mean(self, point: int) -> Optional[npt.NDArray[np.float64]]:
        """
        Mean residual counts divided by ξ, or None without samples.
        """
        count = int(self.samples[point])
        if count == 0:
            return None
        result: npt.NDArray[np.float64] = self.sums[point] / (count * self.xi)
        return result

    def covariance(self, point: int) -> Optional[npt.NDArray[np.float64]]:
        """
        Sample covariance of the residual counts divided by ξ, or None with fewer than two
        samples.
        """
        count = int(self.samples[point])
        if count < 2:
            return None
        s = self.sums[point].astype(np.float64)
        centered = self.products[point].astype(np.float64) - np.outer(s, s) / count
        result: npt.NDArray[np.float64] = centered / ((count - 1) * self.xi)
        return result

    def standard_error(self, point: int) -> Optional[npt.NDArray[np.float64]]:
        """
        Standard error of `mean`, per label.
        """
        cov = self.covariance(point)
        if cov is None:
            return None
        result: npt.NDArray[np.float64] = np.sqrt(
            np.diag(cov) / (self.xi * int(self.samples[point]))
        )
        return result

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DomainError(f"unknown label {label!r}, expected one of {self.labels}")


def _run_trial(
    ens: Ensemble, epsilon: float, base_seed: int, trial_id: int, tau_grid: Sequence[float]
) -> TrajectoryRecord:
    seed = trial_seed(base_seed, trial_id)
    return peel(sample_graph(ens, seed), epsilon, seed, tau_grid, trial_id=trial_id)


def _run_chunk(
    ens: Ensemble, epsilon: float, base_seed: int, trial_ids: range, tau_grid: Sequence[float]
) -> list[TrajectoryRecord]:
    return [_run_trial(ens, epsilon, base_seed, i, tau_grid) for i in trial_ids]


def _workers(threads: int) -> int:
    if threads < 0:
        raise DomainError(f"thread count must be non-negative: {threads!r}")
    return threads or os.cpu_count() or 1


def simulate_trials(
    ens: Ensemble,
    epsilon: float,
    trials: int,
    base_seed: int,
    tau_grid: Sequence[float],
    threads: int = 1,
) -> Iterator[TrajectoryRecord]:
    """
    Run `trials` independent trials and yield their records in trial order.

    `threads` worker processes share the trials; 0 means one per CPU.
    """
    if trials < 1:
        raise DomainError(f"at least one trial is required: {trials!r}")
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"erasure probability outside [0, 1]: {epsilon!r}")
    _validate_grid(tau_grid, epsilon * ens.nodes_per_edge)
    grid = [float(t) for t in tau_grid]
    workers = min(_workers(threads), trials)
    if workers == 1:
        return (_run_trial(ens, epsilon, base_seed, i, grid) for i in range(trials))
    return _run_parallel(ens, epsilon, trials, base_seed, grid, workers)


def _run_parallel(
    ens: Ensemble, epsilon: float, trials: int, base_seed: int, grid: list[float], workers: int
) -> Iterator[TrajectoryRecord]:
    chunk = max(1, math.ceil(trials / (4 * workers)))
    chunks = [range(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
    logger.debug(f"simulating {trials} trials on {workers} processes in {len(chunks)} chunks")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_run_chunk, ens, epsilon, base_seed, ids, grid) for ids in chunks
        ]
        for future in futures:
            yield from future.result()


def summarize(
    ens: Ensemble, tau_grid: Sequence[float], records: Iterable[TrajectoryRecord]
) -> SimSummary:
    summary = SimSummary.empty(ens, tau_grid)
    for record in records:
        summary.add(record)
    return summary


def simulate(
    ens: Ensemble,
    epsilon: float,
    trials: int,
    base_seed: int,
    tau_grid: Sequence[float],
    threads: int = 1,
) -> SimSummary:
    """
    Aggregate `trials` peeling trials into block error and residual-count statistics.
    """
    summary = summarize(
        ens, tau_grid, simulate_trials(ens, epsilon, trials, base_seed, tau_grid, threads)
    )
    logger.info(
        f"{trials} trials at epsilon={epsilon!r}: block error rate "
        f"{summary.block_error_rate!r} ± {summary.block_error_stderr!r}"
    )
    return summary
