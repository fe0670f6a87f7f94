from typing import Optional

import numpy as np
import pytest

from ldpcscale import (
    DomainError,
    Ensemble,
    SimSummary,
    TrajectoryRecord,
    ValidationError,
    alpha,
    counts,
    covariance_analytic,
    peel,
    residual_means,
    sample_graph,
    simulate,
    simulate_trials,
    waterfall,
    y_of_tau,
)
from ldpcscale.peeling import summarize, trial_seed

from .common import IRREGULAR, IRREGULAR_MIXED, REGULAR_36

TAU_GRID = [0.0, 0.02, 0.05, 0.08, 0.1]


def edge_total(counts: dict[str, int]) -> int:
    return sum(counts.values())


@pytest.mark.parametrize(
    "ens,variables,checks",
    [
        (REGULAR_36.with_n(1200), {3: 1200}, {6: 600}),
        (IRREGULAR.with_n(1200), {2: 720, 3: 480}, {6: 480}),
    ],
)
def test_sample_graph_degrees(
    ens: Ensemble, variables: dict[int, int], checks: dict[int, int]
) -> None:
    graph = sample_graph(ens, 11)
    assert graph.n == sum(variables.values())
    assert graph.m == sum(checks.values())
    assert graph.edges == sum(d * c for d, c in variables.items())
    assert dict(zip(*np.unique(graph.var_degrees, return_counts=True))) == variables
    assert dict(zip(*np.unique(graph.check_degrees, return_counts=True))) == checks
    assert np.array_equal(np.bincount(graph.edge_var, minlength=graph.n), graph.var_degrees)
    assert np.array_equal(np.bincount(graph.edge_check, minlength=graph.m), graph.check_degrees)
    assert np.array_equal(np.diff(graph.var_start), graph.var_degrees)


def test_sample_graph_determinism() -> None:
    ens = REGULAR_36.with_n(1200)
    assert sample_graph(ens, 3).adjacency() == sample_graph(ens, 3).adjacency()
    for seed in range(10):
        first, second = sample_graph(ens, seed), sample_graph(ens, seed + 100)
        assert not np.array_equal(first.edge_check, second.edge_check)


def test_trial_seed() -> None:
    assert trial_seed(0, 1) == trial_seed(0, 1)
    assert len({trial_seed(0, i) for i in range(100)}) == 100
    assert trial_seed(1, 0) != trial_seed(0, 1)
    assert 0 <= trial_seed(2**63, 5) < 2**64
    with pytest.raises(DomainError):
        trial_seed(-1, 0)


def test_peel_without_erasures() -> None:
    graph = sample_graph(REGULAR_36.with_n(600), 1)
    record = peel(graph, 0.0, 1, [0.0, 0.1, 0.2])
    assert record.success
    assert record.iterations == 0
    assert record.residual_at_halt == 0
    first, halted, absent = record.samples
    assert first is not None and halted is not None
    assert edge_total(first.l_counts) == 0
    assert halted.tau == 0.1 and halted.t == 0
    assert absent is None


def test_peel_fully_erased() -> None:
    graph = sample_graph(REGULAR_36.with_n(600), 1)
    record = peel(graph, 1.0, 1, [0.0, 0.1])
    assert not record.success
    assert record.iterations == 0
    assert record.residual_at_halt == 1800
    assert record.samples[0] is not None
    assert record.samples[0].r_counts["6"] == 1800
    assert record.samples[0].r_counts["1"] == 0


@pytest.mark.parametrize("ens", [REGULAR_36.with_n(2000), IRREGULAR.with_n(2000)])
@pytest.mark.parametrize("eps", [0.3, 0.5])
def test_peel_trajectory(ens: Ensemble, eps: float) -> None:
    graph = sample_graph(ens, 5)
    record = peel(graph, eps, 5, TAU_GRID, trial_id=4)
    assert record.trial_id == 4
    assert record.success == (record.residual_at_halt == 0)

    previous: Optional[int] = None
    for tau, sample in zip(TAU_GRID, record.samples):
        if sample is None:
            continue
        assert sample.tau == tau
        assert edge_total(sample.r_counts) == edge_total(sample.l_counts)
        assert sample.t <= record.iterations
        if sample.t < record.iterations:
            assert (sample.t - 1) / graph.edges < tau <= sample.t / graph.edges
        total = edge_total(sample.l_counts)
        assert previous is None or total <= previous
        previous = total
    assert peel(graph, eps, 5, TAU_GRID, trial_id=4) == record


def test_peel_invalid_grid() -> None:
    graph = sample_graph(REGULAR_36.with_n(600), 1)
    with pytest.raises(DomainError):
        peel(graph, 0.4, 1, [0.05, 0.02])
    with pytest.raises(DomainError):
        peel(graph, 0.4, 1, [0.5])
    with pytest.raises(DomainError):
        peel(graph, 1.5, 1, [0.0])


def run(trials: int, base_seed: int = 0, threads: int = 1) -> list[TrajectoryRecord]:
    ens = REGULAR_36.with_n(1000)
    return list(simulate_trials(ens, 0.4, trials, base_seed, TAU_GRID, threads=threads))


def test_simulate_trials_order_and_seeds() -> None:
    records = run(6, base_seed=9)
    assert [r.trial_id for r in records] == list(range(6))
    assert [r.seed for r in records] == [trial_seed(9, i) for i in range(6)]


def test_simulate_trials_independent_of_workers() -> None:
    assert run(8, threads=1) == run(8, threads=2)


def test_simulate_trials_invalid() -> None:
    ens = REGULAR_36.with_n(1000)
    with pytest.raises(DomainError):
        simulate_trials(ens, 0.4, 0, 0, TAU_GRID)
    with pytest.raises(DomainError):
        simulate_trials(ens, 1.5, 10, 0, TAU_GRID)
    with pytest.raises(DomainError):
        simulate_trials(ens, 0.4, 10, 0, [0.2])
    with pytest.raises(DomainError):
        simulate_trials(ens, 0.4, 10, 0, TAU_GRID, threads=-1)


def test_summary_single_trial() -> None:
    ens = REGULAR_36.with_n(1000)
    record = run(1)[0]
    summary = summarize(ens, TAU_GRID, [record])
    assert summary.trials == 1
    assert summary.labels == ["l3", "r1", "r2", "r3", "r4", "r5", "r6"]
    sample = record.samples[2]
    assert sample is not None
    mean = summary.mean(2)
    assert mean is not None
    assert mean[summary.index("r1")] == sample.r_counts["1"] / 3000
    assert mean[summary.index("l3")] == sample.l_counts["3"] / 3000
    assert summary.covariance(2) is None
    assert summary.standard_error(2) is None
    with pytest.raises(DomainError):
        summary.index("l4")


def test_summary_merge() -> None:
    ens = REGULAR_36.with_n(1000)
    records = run(9)
    parts = [summarize(ens, TAU_GRID, records[i : i + 3]) for i in (0, 3, 6)]
    left = parts[0].merge(parts[1]).merge(parts[2])
    right = parts[0].merge(parts[1].merge(parts[2]))
    whole = summarize(ens, TAU_GRID, records)
    for merged in (left, right):
        assert merged.trials == whole.trials == 9
        assert merged.failures == whole.failures
        assert np.array_equal(merged.samples, whole.samples)
        assert np.array_equal(merged.sums, whole.sums)
        assert np.array_equal(merged.products, whole.products)
    cov = whole.covariance(1)
    assert cov is not None
    assert np.allclose(cov, cov.T)
    assert 0.0 <= whole.block_error_rate <= 1.0

    with pytest.raises(ValidationError):
        parts[0].merge(SimSummary.empty(ens, [0.0, 0.05]))


def test_simulate_block_errors() -> None:
    ens = REGULAR_36.with_n(500)
    summary = simulate(ens, 0.6, 20, 3, [0.0])
    assert summary.block_error_rate == 1.0
    assert summary.block_error_stderr == 0.0
    summary = simulate(ens, 0.0, 5, 3, [0.0])
    assert summary.block_error_rate == 0.0


def test_simulate_missing_check_degree() -> None:
    # n=13 rounds every degree-7 check away
    ens = IRREGULAR_MIXED.with_n(13)
    assert counts(ens).check_nodes == {5: 7}
    summary = simulate(ens, 0.4, 2, 0, [0.0])
    assert summary.trials == 2
    assert summary.labels[-1] == "r7"
    mean = summary.mean(0)
    assert mean is not None
    assert mean[summary.index("r6")] == 0.0
    assert mean[summary.index("r7")] == 0.0


@pytest.mark.slow
def test_monte_carlo_matches_evolution() -> None:
    ens = REGULAR_36.with_n(20000)
    grid = [0.02, 0.05, 0.08]
    summary = simulate(ens, 0.40, 1000, 2024, grid, threads=0)
    for p, tau in enumerate(grid):
        y = y_of_tau(ens, 0.40, tau)
        mean_l, mean_r = residual_means(ens, 0.40, y)
        mean, stderr = summary.mean(p), summary.standard_error(p)
        assert mean is not None and stderr is not None
        for label, expected in (("r1", mean_r[1]), ("l3", mean_l[3])):
            i = summary.index(label)
            assert abs(mean[i] - expected) <= 4 * stderr[i]

        sample_cov = summary.covariance(p)
        assert sample_cov is not None
        cov = covariance_analytic(ens, 0.40, y)
        r1, l3 = summary.index("r1"), summary.index("l3")
        assert sample_cov[r1, r1] == pytest.approx(cov.entry("r1", "r1"), rel=0.10)
        assert sample_cov[l3, r1] == pytest.approx(cov.entry("l3", "r1"), rel=0.15)


@pytest.mark.slow
def test_monte_carlo_waterfall() -> None:
    ens = REGULAR_36.with_n(2048)
    result = alpha(ens)
    eps_list = np.linspace(result.epsilon_star - 0.03, result.epsilon_star + 0.02, 7).tolist()
    predicted = [p.p_block for p in waterfall(ens, eps_list, result=result)]
    empirical = [
        simulate(ens, eps, 10_000, 77, [0.0], threads=0).block_error_rate for eps in eps_list
    ]
    assert predicted == sorted(predicted)
    assert empirical == sorted(empirical)

    def crossing(values: list[float]) -> float:
        return float(np.interp(0.5, values, eps_list))

    gap = max(abs(p - e) for p, e in zip(predicted, empirical))
    print(f"largest vertical gap between predicted and empirical block error rates: {gap:.4f}")
    assert abs(crossing(predicted) - crossing(empirical)) <= 0.015
