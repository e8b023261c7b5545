import math

import numpy as np
import pytest

from adaptive_qse.core import (
    DOWN,
    MINUS,
    PLUS,
    PLUS_I,
    UP,
    RandomSource,
    ValidationError,
    bloch_to_state,
    fidelity,
    haar_random_state,
    qubit_basis,
)
from adaptive_qse.optimizer import local_pauli_catalog, pauli_catalog
from adaptive_qse.simulator import (
    Stopping,
    Strategy,
    StrategyKind,
    run_protocol,
    sample_outcome,
    scripted_trace,
)

TABLE1 = [0.5, 2 / 3, 0.5 + math.sqrt(2) / 6, 0.5 + math.sqrt(3) / 6]


def frequencies(hidden, basis, n, seed):
    rng = RandomSource(seed)
    counts = np.zeros(basis.dim)
    for _ in range(n):
        counts[sample_outcome(hidden, basis, rng)] += 1
    return counts / n


def test_sampler_examples():
    z, x = pauli_catalog()[0], pauli_catalog()[1]
    rng = RandomSource(0)
    assert all(sample_outcome(UP, z, rng) == 0 for _ in range(1000))
    assert frequencies(UP, x, 100_000, 1)[0] == pytest.approx(0.5, abs=0.005)
    assert frequencies(bloch_to_state(math.pi / 3, 0), z, 100_000, 2)[0] == pytest.approx(0.75, abs=0.005)


def test_sampler_two_qubit_frequencies():
    hidden = haar_random_state(4, RandomSource(3))
    basis = local_pauli_catalog()[4]
    freq = frequencies(hidden, basis, 100_000, 4)
    assert np.allclose(freq, basis.probabilities(hidden), atol=0.005)


def test_zero_iterations_gives_empty_run():
    run = run_protocol(PLUS, Strategy("adaptive"), Stopping(0), RandomSource(0))
    assert run.estimates == [] and run.record.k == 0 and run.bases_used == []
    assert run.initial_estimate.fidelity == pytest.approx(0.5)
    assert len(run.infidelity_curve()) == 1


@pytest.mark.parametrize("kind", list(StrategyKind))
def test_runs_are_bit_reproducible(kind):
    cat = pauli_catalog() if kind in (StrategyKind.RESTRICTED_ADAPTIVE, StrategyKind.NONADAPTIVE) else None
    hidden = haar_random_state(2, RandomSource(5))
    a = run_protocol(hidden, Strategy(kind, catalog=cat), Stopping(8), RandomSource(6))
    b = run_protocol(hidden, Strategy(kind, catalog=cat), Stopping(8), RandomSource(6))
    assert a.outcomes == b.outcomes
    assert all(np.array_equal(x.vectors, y.vectors) for x, y in zip(a.bases_used, b.bases_used))
    assert np.array_equal(a.infidelity_curve(), b.infidelity_curve())
    assert len(a.estimates) == a.record.k == 8
    assert all(0 <= e.infidelity <= 1 for e in a.estimates)


def test_table1_scripted_trace():
    rows = scripted_trace([UP, PLUS, PLUS_I])
    assert [r.fidelity for r in rows] == pytest.approx(TABLE1, abs=1e-12)
    for r in rows[1:3]:
        assert abs(r.next_score - r.scripted_score) <= 1e-9
    assert rows[1].report.degenerate and not rows[2].report.degenerate
    assert rows[3].report.degenerate


def test_table1_through_run_protocol_with_z_start():
    # start in Z, steer outcomes to |up>, then whichever optimal-basis vector is
    # closest to the scripted state; the fidelities only depend on the record
    script = [UP, PLUS, PLUS_I]
    picks = []

    def sampler(basis, rng):
        target = script[len(picks)]
        n = int(np.argmax([fidelity(e, target) for e in basis]))
        picks.append(basis[n])
        return n

    strategy = Strategy("restricted-adaptive", catalog=pauli_catalog())
    run = run_protocol(UP, strategy, Stopping(3), RandomSource(0), sampler=sampler)
    assert [b.label for b in run.bases_used] == ["Z", "X", "Y"]
    assert [e.fidelity for e in run.estimates] == pytest.approx(TABLE1[1:], abs=1e-12)


def test_estimator_never_reads_hidden_state():
    outcomes = [0, 1, 1, 0, 0, 1]

    def scripted(basis, rng):
        n = outcomes[len(seen)]
        seen.append(n)
        return n

    bases = []
    for hidden in (UP, haar_random_state(2, RandomSource(1)), MINUS):
        seen = []
        run = run_protocol(hidden, Strategy("adaptive"), Stopping(6), RandomSource(9), sampler=scripted)
        bases.append([b.vectors for b in run.bases_used])
    for other in bases[1:]:
        assert all(np.array_equal(x, y) for x, y in zip(bases[0], other))


def test_corrupting_caller_hidden_state_changes_nothing():
    hidden = haar_random_state(2, RandomSource(2)).copy()
    ref = run_protocol(hidden.copy(), Strategy("adaptive"), Stopping(5), RandomSource(3))

    calls = []

    def corrupting(basis, rng):
        from adaptive_qse.simulator import sample_outcome as draw

        n = draw(ref.hidden_state, basis, rng)
        if not calls:
            hidden[:] = DOWN  # tamper with the caller's copy after emission
        calls.append(n)
        return n

    run = run_protocol(hidden, Strategy("adaptive"), Stopping(5), RandomSource(3), sampler=corrupting)
    assert run.outcomes == ref.outcomes
    assert all(np.array_equal(a.vectors, b.vectors) for a, b in zip(run.bases_used, ref.bases_used))
    assert np.array_equal(run.hidden_state, ref.hidden_state)


@pytest.mark.parametrize("seed", range(8))
def test_first_three_adaptive_bases_are_mutually_unbiased(seed):
    hidden = haar_random_state(2, RandomSource(seed))
    run = run_protocol(hidden, Strategy("adaptive"), Stopping(3), RandomSource(50 + seed))
    b = run.bases_used
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        for e in b[i]:
            for f in b[j]:
                assert abs(fidelity(e, f) - 0.5) <= 1e-5


def test_nonadaptive_cycles_through_catalog():
    cat = local_pauli_catalog()
    run = run_protocol(haar_random_state(4, RandomSource(0)), Strategy("nonadaptive", catalog=cat), Stopping(20), RandomSource(1))
    assert [b.label for b in run.bases_used] == [cat.labels[k % 9] for k in range(20)]


def test_first_catalog_entry_convention_and_flag():
    cat = pauli_catalog()
    hidden = haar_random_state(2, RandomSource(0))
    run = run_protocol(hidden, Strategy("restricted-adaptive", catalog=cat), Stopping(1), RandomSource(1))
    assert run.bases_used[0].label == "Z"
    labels = {
        run_protocol(hidden, Strategy("restricted-adaptive", catalog=cat, first_from_catalog=False), Stopping(1), RandomSource(s)).bases_used[0].label
        for s in range(30)
    }
    assert labels == {"Z", "X", "Y"}


def test_random_strategy_uses_fresh_bases():
    run = run_protocol(UP, Strategy("random"), Stopping(4), RandomSource(2))
    firsts = [b[0] for b in run.bases_used]
    assert all(fidelity(a, b) < 0.999 for a, b in zip(firsts, firsts[1:]))


def test_adaptive_warm_start_is_the_previous_basis():
    run = run_protocol(PLUS_I, Strategy("adaptive", restarts=0), Stopping(4), RandomSource(3))
    for report in run.reports[1:]:
        assert report.restarts_used == 1


def test_stopping_rules():
    run = run_protocol(UP, Strategy("nonadaptive", catalog=pauli_catalog()), Stopping(200, purity_eps=0.1), RandomSource(4))
    assert run.stop_reason == "purity" and run.estimates[-1].purity > 0.9
    assert all(e.purity <= 0.9 for e in run.estimates[:-1])
    run = run_protocol(UP, Strategy("nonadaptive", catalog=pauli_catalog()), Stopping(200, fidelity_eps=1e-3), RandomSource(4))
    assert run.stop_reason == "fidelity-delta"
    assert fidelity(run.estimates[-2].state, run.estimates[-1].state) > 1 - 1e-3
    assert run_protocol(UP, Strategy("random"), Stopping(5), RandomSource(4)).stop_reason == "iteration-cap"


def test_permanent_cap_truncates_ryser_runs(monkeypatch):
    import adaptive_qse.core as core_mod
    import adaptive_qse.posterior as post_mod

    monkeypatch.setattr(core_mod, "PERMANENT_CAP", 6)
    monkeypatch.setattr(post_mod, "PERMANENT_CAP", 6)
    run = run_protocol(PLUS, Strategy("random", engine="ryser"), Stopping(40), RandomSource(5))
    assert run.truncated and run.stop_reason == "permanent-cap"
    assert len(run.estimates) == run.record.k == 5
    full = run_protocol(PLUS, Strategy("random"), Stopping(40), RandomSource(5))
    assert not full.truncated and len(full.estimates) == 40
    np.testing.assert_allclose(run.infidelity_curve(), full.infidelity_curve()[:6], atol=1e-10)


def test_strategy_validation():
    with pytest.raises(ValidationError):
        Strategy("restricted-adaptive")
    with pytest.raises(ValueError):
        Strategy("greedy")
    with pytest.raises(ValidationError):
        run_protocol(haar_random_state(4, RandomSource(0)), Strategy("adaptive"), Stopping(1), RandomSource(0))
    with pytest.raises(ValidationError):
        run_protocol(UP, Strategy("nonadaptive", catalog=local_pauli_catalog()), Stopping(1), RandomSource(0))
    with pytest.raises(ValidationError):
        Stopping(-1)
    assert Strategy("random", label="r").name == "r"


@pytest.mark.slow
def test_median_infidelity_non_increasing_for_adaptive():
    n, k_max = 500, 8
    curves = np.array([
        run_protocol(haar_random_state(2, RandomSource(7).spawn(i)), Strategy("adaptive", restarts=4), Stopping(k_max), RandomSource(8).spawn(i)).infidelity_curve()
        for i in range(n)
    ])
    med = np.median(curves, axis=0)
    boot = np.random.default_rng(0).integers(0, n, size=(200, n))
    se = np.array([np.median(curves[idx], axis=0) for idx in boot]).std(axis=0)
    for k in range(1, k_max):
        assert med[k + 1] <= med[k] + 3 * math.hypot(se[k], se[k + 1])


def test_basis_vectors_of_outcomes_are_recorded():
    run = run_protocol(DOWN, Strategy("nonadaptive", catalog=pauli_catalog()), Stopping(3), RandomSource(0))
    for basis, n, phi in zip(run.bases_used, run.outcomes, run.record.outcomes):
        assert np.array_equal(basis[n], phi)
    assert run.outcomes[0] == 1
    assert fidelity(qubit_basis(0, 0)[1], run.record.outcomes[0]) == pytest.approx(1)
