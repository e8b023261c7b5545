"""Average infidelity of the four qubit strategies at a small scale.

The acceptance suite runs the same comparison with 500 hidden states and 30
measurements; this version takes under a minute.
"""
import sys

from adaptive_qse.harness import qubit_config, run_experiment

n = int(sys.argv[1]) if len(sys.argv) > 1 else 40
stats = run_experiment(qubit_config(n_experiments=n, k_max=10, seed=7))
print(f"{'k':>3} {'bound':>8} " + " ".join(f"{s:>20}" for s in stats.labels))
for k in range(0, 11, 2):
    cells = " ".join(f"{stats.mean[s][k]:>12.4f}+-{stats.stderr[s][k]:.4f}" for s in stats.labels)
    print(f"{k:>3} {stats.bound[k]:>8.4f} {cells}")
