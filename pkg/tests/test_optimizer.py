import math

import numpy as np
import pytest

from adaptive_qse.core import (
    DOWN,
    PLUS,
    PLUS_I,
    UP,
    MeasurementBasis,
    RandomSource,
    ValidationError,
    fidelity,
    haar_random_basis,
    haar_random_state,
    qubit_basis,
    state_to_bloch,
)
from adaptive_qse.optimizer import (
    BasisCatalog,
    CatalogKind,
    QubitScore,
    basis_score,
    expected_fidelity,
    local_pauli_catalog,
    ncg_maximize,
    optimize_from_catalog,
    optimize_qubit_basis,
    pauli_catalog,
)
from adaptive_qse.posterior import MeasurementRecord, Prior, bloch_moments, most_likely_state, unnormalized_moment

from conftest import axis_count_outcomes, random_states

# weighted expected-fidelity scores of the x, y, z bases for the (6, 3, 1) record, from a
# 400 x 800 Gauss-Legendre integration of the weighted objective
AXIS_RECORD_XYZ = (0.93394, 0.93779, 0.93161)


def unbiased_error(basis, state):
    return max(abs(fidelity(e, state) - 0.5) for e in basis)


def test_empty_record_scores_are_isotropic():
    rec = MeasurementRecord(2)
    rng = RandomSource(0)
    scores = [basis_score(rec, haar_random_basis(2, rng)) for _ in range(20)]
    assert (max(scores) - min(scores)) / max(scores) <= 1e-10
    assert scores[0] == pytest.approx(2 / 3)


def test_score_prefers_unbiased_basis_after_one_outcome():
    rec = MeasurementRecord(2, [UP])
    cat = pauli_catalog()
    assert basis_score(rec, cat[1]) > basis_score(rec, cat[0])
    report = optimize_from_catalog(rec, cat)
    assert report.best_index == 1 and report.degenerate
    s = report.per_candidate_scores
    assert abs(s[1] - s[2]) <= 1e-10


def test_catalog_argmax_after_up_plus_is_y():
    report = optimize_from_catalog(MeasurementRecord(2, [UP, PLUS]), pauli_catalog())
    assert report.best_basis.label == "Y" and not report.degenerate


def test_continuous_optimum_after_one_outcome_is_degenerate_and_unbiased():
    rec = MeasurementRecord(2, [UP])
    report = optimize_qubit_basis(rec, restarts=8, rng=RandomSource(1))
    assert report.degenerate
    assert report.score == pytest.approx(0.5 + math.sqrt(2) / 6, abs=1e-9)
    top = [b for fx, b in report.local_optima if fx >= report.score - 1e-8]
    assert len(top) >= 2
    for b in top:
        assert unbiased_error(b, UP) <= 1e-6


def test_continuous_optimum_after_three_outcomes_unbiased_to_estimate():
    rec = MeasurementRecord(2, [UP, PLUS, PLUS_I])
    psi, _ = most_likely_state(rec)
    report = optimize_qubit_basis(rec, restarts=10, rng=RandomSource(2))
    assert report.degenerate
    for fx, b in report.local_optima:
        if fx >= report.score - 1e-8:
            assert unbiased_error(b, psi) <= 1e-6


def test_continuous_optimum_after_two_outcomes_is_y():
    rec = MeasurementRecord(2, [UP, PLUS])
    report = optimize_qubit_basis(rec, rng=RandomSource(3))
    assert not report.degenerate
    assert max(fidelity(report.best_basis[0], PLUS_I), fidelity(report.best_basis[1], PLUS_I)) > 1 - 1e-9
    psi, _ = most_likely_state(rec)
    assert unbiased_error(report.best_basis, psi) <= 1e-5


def test_planar_prior_optimum_angle():
    third = qubit_basis(math.pi / 2, 3 * math.pi / 4)[0]
    rec = MeasurementRecord(2, [PLUS, PLUS_I, third], prior=Prior.PLANAR_QUBIT)
    report = optimize_qubit_basis(rec, rng=RandomSource(4))
    theta, phi = report.angles
    assert theta == pytest.approx(math.pi / 2, abs=1e-4)
    assert phi % math.pi == pytest.approx(2.9113, abs=2e-3)


def test_six_three_one_record_continuous_optimum_is_y_axis():
    rec = MeasurementRecord(2, axis_count_outcomes(6, 3, 1))
    report = optimize_qubit_basis(rec, rng=RandomSource(5))
    e = report.best_basis[0]
    t, p = state_to_bloch(e)
    axis = np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])
    assert math.acos(min(1.0, abs(axis[1]))) <= 1e-3


def test_axis_count_catalog_scores_match_independent_integration():
    cat = pauli_catalog()
    for (k1, k2, k3), order in [((6, 3, 1), (1, 0, 2)), ((6, 1, 3), (0, 1, 2))]:
        rec = MeasurementRecord(2, axis_count_outcomes(k1, k2, k3))
        report = optimize_from_catalog(rec, cat)
        zxy = report.per_candidate_scores
        if (k1, k2, k3) == (6, 3, 1):
            assert (zxy[1], zxy[2], zxy[0]) == pytest.approx(AXIS_RECORD_XYZ, abs=1e-5)
        # the catalog choice follows the continuous optimum axis
        cont = optimize_qubit_basis(rec, rng=RandomSource(6))
        overlaps = [max(fidelity(cont.best_basis[0], b[0]), fidelity(cont.best_basis[0], b[1])) for b in cat]
        assert report.best_index == int(np.argmax(overlaps))


def test_report_score_matches_reevaluation():
    rng = RandomSource(7)
    for k in (1, 3, 6):
        rec = MeasurementRecord(2, [haar_random_state(2, rng) for _ in range(k)])
        report = optimize_qubit_basis(rec, rng=rng)
        assert report.score == pytest.approx(basis_score(rec, report.best_basis), abs=1e-10)
        cat = optimize_from_catalog(rec, pauli_catalog())
        assert cat.score == pytest.approx(basis_score(rec, cat.best_basis), abs=1e-10)
        assert cat.score <= report.score + 1e-9


def test_phase_invariance_of_scores():
    rec = MeasurementRecord(3, random_states(3, 3, 8))
    basis = haar_random_basis(3, RandomSource(8))
    phased = MeasurementBasis(basis.vectors * np.exp(1j * np.array([0.3, -1.2, 2.5])))
    assert basis_score(rec, phased) == pytest.approx(basis_score(rec, basis), abs=1e-12)


def test_scale_invariance_of_catalog_argmax():
    rec = MeasurementRecord(4, [np.kron(a, b) for a, b in zip(random_states(2, 3, 9), random_states(2, 3, 10))])
    cat = local_pauli_catalog()
    report = optimize_from_catalog(rec, cat)
    norm = unnormalized_moment(rec).norm
    raw = [s * norm for s in report.per_candidate_scores]
    assert int(np.argmax(raw)) == report.best_index
    assert int(np.argmax([17.0 * s for s in raw])) == report.best_index


@pytest.mark.parametrize("seed", range(5))
def test_weighted_and_unnormalized_objectives_share_argmax(seed):
    rng = RandomSource(100 + seed)
    k = 1 + seed
    rec = MeasurementRecord(2, [haar_random_state(2, rng) for _ in range(k)])
    for _ in range(3):
        b = haar_random_basis(2, rng)
        assert expected_fidelity(rec, b) == pytest.approx(basis_score(rec, b), abs=1e-12)
    unnormalized = optimize_qubit_basis(rec, restarts=4, rng=rng.spawn(1))

    def weighted(x):
        return expected_fidelity(rec, qubit_basis(x[0] % math.pi, x[1] % (2 * math.pi)))

    grid = [(t, p) for t in np.linspace(0.2, 2.9, 6) for p in np.linspace(0, 2 * math.pi, 8, endpoint=False)]
    start = max(grid, key=weighted)
    x, fx, _, _ = ncg_maximize(weighted, start, 1e-5, 1e-7, 200)
    assert fx == pytest.approx(unnormalized.score, abs=1e-7)
    assert basis_score(rec, qubit_basis(x[0] % math.pi, x[1] % (2 * math.pi))) == pytest.approx(unnormalized.score, abs=1e-7)


def test_qubit_score_closed_form_route_matches_generic():
    rec = MeasurementRecord(2, [UP, UP, PLUS, DOWN, PLUS_I])
    a = QubitScore.from_record(rec)
    b = QubitScore(*bloch_moments(rec))
    for t, p in [(0.3, 1.0), (2.0, 4.0), (math.pi / 2, 0.0)]:
        assert a.at_angles(t, p) == pytest.approx(b.at_angles(t, p), abs=1e-12)


def test_local_pauli_catalog_layout():
    cat = local_pauli_catalog()
    assert len(cat) == 9 and cat.kind is CatalogKind.LOCAL_PAULI_TWO_QUBIT
    assert len(set(cat.labels)) == 9
    assert cat.labels[0] == "XX" and cat.labels[-1] == "ZZ"
    for b in cat:
        assert np.allclose(b.vectors.conj().T @ b.vectors, np.eye(4), atol=1e-12)
    assert np.allclose(cat[8][0], np.kron(UP, UP))
    assert pauli_catalog().labels == ["Z", "X", "Y"]


def test_catalog_validation():
    with pytest.raises(ValidationError):
        BasisCatalog(())
    with pytest.raises(ValidationError):
        BasisCatalog((pauli_catalog()[0], local_pauli_catalog()[0]))
    with pytest.raises(ValidationError):
        BasisCatalog((pauli_catalog()[0], pauli_catalog()[0]))
    with pytest.raises(ValidationError):
        optimize_from_catalog(MeasurementRecord(4), pauli_catalog())
    with pytest.raises(ValidationError):
        optimize_qubit_basis(MeasurementRecord(3))


def test_catalog_optimizer_is_reproducible():
    rec = MeasurementRecord(2, random_states(2, 4, 11))
    a = optimize_from_catalog(rec, pauli_catalog())
    b = optimize_from_catalog(rec, pauli_catalog())
    assert a.per_candidate_scores == b.per_candidate_scores and a.best_index == b.best_index


def test_continuous_optimizer_is_reproducible():
    rec = MeasurementRecord(2, random_states(2, 4, 12))
    a = optimize_qubit_basis(rec, rng=RandomSource(3))
    b = optimize_qubit_basis(rec, rng=RandomSource(3))
    assert np.array_equal(a.best_basis.vectors, b.best_basis.vectors) and a.score == b.score


def test_ncg_on_smooth_function():
    x, fx, its, ok = ncg_maximize(lambda v: -((v[0] - 1) ** 2) - 3 * (v[1] + 2) ** 2, (0.0, 0.0), 1e-5, 1e-8, 200)
    assert ok and x == pytest.approx([1, -2], abs=1e-6) and fx == pytest.approx(0, abs=1e-10)
