"""Two-qubit states measured in products of local Pauli bases.

Compares picking the best of the nine local-Pauli products at each step with
cycling through them in a fixed order.
"""
from adaptive_qse.harness import run_experiment, two_qubit_config

stats = run_experiment(two_qubit_config(n_experiments=20, k_max=6, seed=11))
for k in range(7):
    row = "  ".join(f"{s}={stats.mean[s][k]:.4f}" for s in stats.labels)
    print(f"k={k}  {row}")
