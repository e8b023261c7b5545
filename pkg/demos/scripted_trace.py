"""Replay the outcomes up, +, +i and watch the estimate and the chosen bases.

After one outcome the best next basis is any basis unbiased to it; after two
outcomes the optimum must also be unbiased to the first. Later steps
are only checked against the current estimate.  The script shows the
estimate fidelity and how far the optimizer's basis is from unbiased.
"""
import numpy as np

from adaptive_qse import RandomSource, scripted_trace, state_to_bloch
from adaptive_qse.core import PLUS, PLUS_I, UP

script = [UP, PLUS, PLUS_I]
rows = scripted_trace(script, restarts=8, rng=RandomSource(0))
for row in rows:
    theta, phi = row.angles
    line = f"k={row.k}  estimate (theta, phi)=({theta:.4f}, {phi:.4f})  lambda_max={row.fidelity:.6f}"
    if row.next_basis is not None:
        refs = [row.state] + (script[: row.k] if row.k < 3 else [])
        bias = max(abs(abs(np.vdot(e, v)) ** 2 - 0.5) for e in row.next_basis for v in refs)
        axis = state_to_bloch(row.next_basis[0])
        gap = "" if row.scripted_score is None else f"  script gap={abs(row.next_score - row.scripted_score):.1e}"
        line += f"\n     next basis axis=({axis[0]:.4f}, {axis[1]:.4f})  unbiased err={bias:.1e}{gap}"
    print(line)
