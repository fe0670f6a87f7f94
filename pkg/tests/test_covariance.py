import numpy as np
import pytest

from ldpcscale import (
    DomainError,
    Ensemble,
    auxiliary,
    auxiliary_from_matrix,
    covariance_analytic,
    initial_covariance,
    means_at,
    v_term,
)
from ldpcscale.covariance import CovarianceMatrix, covariance_labels, max_discrepancy

from .common import (
    IRREGULAR,
    IRREGULAR_MIXED,
    REGULAR_36,
    ensemble_ids,
    ensembles,
    eps_grid,
    y_grid,
)


def test_labels() -> None:
    assert covariance_analytic(REGULAR_36, 0.4, 0.6).names == ["l3", "r1", "r2", "r3", "r4", "r5"]
    assert [f"{t}{d}" for t, d in covariance_labels(IRREGULAR_MIXED)] == [
        "l2",
        "l3",
        "r1",
        "r2",
        "r3",
        "r4",
        "r5",
        "r6",
    ]


def test_regular_sample_values() -> None:
    cov = covariance_analytic(REGULAR_36, 0.4, 0.6)
    assert cov.entry("l3", "l3") == pytest.approx(0.72, abs=1e-12)
    assert cov.entry("r1", "r1") == pytest.approx(0.025005, abs=1e-6)
    assert cov.entry("l3", "r1") == pytest.approx(-0.101676, abs=1e-6)
    assert cov.entry("r1", "l3") == cov.entry("l3", "r1")


def test_initial_covariance_regular() -> None:
    cov = initial_covariance(REGULAR_36, 0.4)
    assert cov.y == 1.0
    assert cov.entry("l3", "l3") == pytest.approx(3 * 0.24, abs=1e-15)
    assert cov.entry("l3", "r1") == pytest.approx(-0.1306368, abs=1e-12)


@pytest.mark.parametrize("ens", ensembles, ids=ensemble_ids)
@pytest.mark.parametrize("eps", eps_grid + [1.0])
def test_boundary_consistency(ens: Ensemble, eps: float) -> None:
    assert covariance_analytic(ens, eps, 1.0).max_abs_diff(initial_covariance(ens, eps)) <= 1e-12


@pytest.mark.parametrize("ens", ensembles, ids=ensemble_ids)
def test_fully_erased_is_deterministic(ens: Ensemble) -> None:
    assert np.max(np.abs(initial_covariance(ens, 1.0).entries)) <= 1e-15


def test_invalid_epsilon() -> None:
    with pytest.raises(DomainError):
        covariance_analytic(REGULAR_36, 0.0, 0.5)
    with pytest.raises(DomainError):
        initial_covariance(REGULAR_36, 0.0)
    with pytest.raises(DomainError):
        initial_covariance(REGULAR_36, 1.2)


def test_v_term() -> None:
    assert v_term(REGULAR_36, 0.4, 1, 1) == pytest.approx(0.96 * 0.6**10, rel=1e-14)
    assert v_term(REGULAR_36, 0.4, 6, 6) == pytest.approx(6 * 0.4**12, rel=1e-14)
    for i in range(1, 7):
        assert v_term(REGULAR_36, 0.0, i, i) == 0.0
        for j in range(1, 7):
            assert v_term(IRREGULAR_MIXED, 0.3, i, j) == pytest.approx(
                v_term(IRREGULAR_MIXED, 0.3, j, i), rel=1e-14
            )


@pytest.mark.parametrize("i,j,x", [(0, 1, 0.4), (1, 7, 0.4), (1, 1, 1.5), (1, 1, -0.1)])
def test_v_term_domain(i: int, j: int, x: float) -> None:
    with pytest.raises(DomainError):
        v_term(REGULAR_36, x, i, j)


def test_matrix_accessors() -> None:
    cov = covariance_analytic(IRREGULAR, 0.3, 0.7)
    assert cov.index("l2") == 0
    assert cov.index("r5") == len(cov.names) - 1
    assert cov.to_rows()[1][0] == cov.entry("l3", "l2")
    with pytest.raises(DomainError):
        cov.entry("l4", "r1")
    with pytest.raises(DomainError):
        cov.max_abs_diff(covariance_analytic(REGULAR_36, 0.3, 0.7))
    with pytest.raises(DomainError):
        CovarianceMatrix(cov.labels, np.zeros((2, 2)), 0.7, 0.3)


@pytest.mark.parametrize("ens", ensembles, ids=ensemble_ids)
@pytest.mark.parametrize("eps", eps_grid)
@pytest.mark.parametrize("y", y_grid)
def test_covariance_is_psd(ens: Ensemble, eps: float, y: float) -> None:
    # past the point where decoding stops (r̂_1 <= 0) the closed form is no longer a covariance
    if means_at(ens, eps, y).r1 <= 0.0:
        pytest.skip("no residual degree-one checks at this point")
    cov = covariance_analytic(ens, eps, y)
    assert np.array_equal(cov.entries, cov.entries.T)
    assert cov.is_psd()


@pytest.mark.parametrize("ens", ensembles, ids=ensemble_ids)
@pytest.mark.parametrize("eps", eps_grid)
@pytest.mark.parametrize("y", y_grid)
def test_auxiliary_identities(ens: Ensemble, eps: float, y: float) -> None:
    cov = covariance_analytic(ens, eps, y)
    closed = auxiliary(ens, eps, y)
    assembled = auxiliary_from_matrix(ens, cov, means_at(ens, eps, y))
    assert max_discrepancy(closed, assembled) <= 1e-10


@pytest.mark.parametrize("ens", ensembles, ids=ensemble_ids)
@pytest.mark.parametrize("eps", [0.3, 0.4])
def test_auxiliary_at_start(ens: Ensemble, eps: float) -> None:
    aux = auxiliary(ens, eps, 1.0)
    dc = ens.dc
    expected = eps * (1 - eps) * (1 - dc * ens.rho[dc] * eps ** (dc - 1))
    assert aux.A_sigma == pytest.approx(expected, abs=1e-13)
    assert aux.weighted_sum == pytest.approx(eps * (1 - eps) * ens.nodes_per_edge, abs=1e-15)


def test_auxiliary_structure() -> None:
    aux = auxiliary(IRREGULAR_MIXED, 0.35, 0.6)
    for k in (2, 3):
        assert aux.pair_gap[k, k] == 0.0
        for j in range(1, 7):
            assert aux.S[k, k, j] == 0.0
    assert aux.U[2, 3] == pytest.approx(-aux.U[3, 2], abs=1e-14)
    assert aux.V[2, 5] == pytest.approx(aux.V[5, 2], rel=1e-14)
    with pytest.raises(DomainError):
        auxiliary(IRREGULAR_MIXED, 0.0, 0.6)
