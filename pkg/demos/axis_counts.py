"""k1 ups, k2 pairs of x outcomes and k3 pairs of y outcomes: which axis next?

Prints the continuous optimum and the Pauli catalog scores for both orderings
of k2 and k3.  The continuous optimum follows the axis with fewer outcomes.
"""
from adaptive_qse import MeasurementRecord, RandomSource, basis_score, optimize_qubit_basis, pauli_catalog
from adaptive_qse.core import MINUS, MINUS_I, PLUS, PLUS_I, UP
from adaptive_qse.core import state_to_bloch

for k1, k2, k3 in [(6, 3, 1), (6, 1, 3)]:
    outs = [UP] * k1 + [PLUS, MINUS] * k2 + [PLUS_I, MINUS_I] * k3
    rec = MeasurementRecord(2, outs)
    rep = optimize_qubit_basis(rec, restarts=8, rng=RandomSource(1))
    scores = {b.label: basis_score(rec, b) for b in pauli_catalog()}
    best = max(scores, key=scores.get)
    print(f"(k1,k2,k3)=({k1},{k2},{k3})  optimum axis (theta, phi)={tuple(round(a, 4) for a in state_to_bloch(rep.best_basis[0]))}")
    print("    catalog scores: " + "  ".join(f"{k}={v:.6f}" for k, v in scores.items()) + f"  -> {best}")
