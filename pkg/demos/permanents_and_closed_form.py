"""Three routes to the same posterior moment of a Pauli record.

Ryser permanents, the monomial expansion and the closed-form Pauli sum must
agree to rounding error.
"""
import numpy as np

from adaptive_qse import PauliCounts, closedform_moment, unnormalized_moment

counts = PauliCounts(up=3, down=1, plus=2, minus=0, plus_i=1, minus_i=1)
record = counts.to_record()
ryser = unnormalized_moment(record, "ryser").normalized
expansion = unnormalized_moment(record, "expansion").normalized
closed = closedform_moment(counts).normalized
print("normalized moment (expansion):")
print(np.round(expansion, 6))
print(f"|ryser - expansion|      = {np.linalg.norm(ryser - expansion):.2e}")
print(f"|closed form - expansion| = {np.linalg.norm(closed - expansion):.2e}")
