"""Qubit known to lie on the equator: three outcomes, then the best fourth basis.

With the planar prior the optimizer still searches the whole sphere, and the
optimum lands on the equator.
"""
import math

from adaptive_qse import MeasurementRecord, Prior, RandomSource, optimize_qubit_basis, qubit_basis
from adaptive_qse.core import PLUS, PLUS_I

third = qubit_basis(math.pi / 2, 3 * math.pi / 4)[0]
record = MeasurementRecord(2, [PLUS, PLUS_I, third], prior=Prior.PLANAR_QUBIT)
report = optimize_qubit_basis(record, restarts=8, rng=RandomSource(31))
theta, phi = report.angles
print(f"best basis axis: theta={theta:.6f}  phi mod pi={phi % math.pi:.6f}  score={report.score:.9f}")
