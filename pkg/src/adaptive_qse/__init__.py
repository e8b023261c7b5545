"""Adaptive Bayesian estimation of pure quantum states from single-copy measurements.

The estimator keeps the exact posterior moment of the measurement record,
reports its top eigenvector as the estimate, and picks each next basis to
maximize the expected fidelity after one more outcome.
"""
__version__ = "0.1.0"

from .core import (
    MeasurementBasis,
    PermanentCapError,
    RandomSource,
    ValidationError,
    bloch_to_state,
    fidelity,
    haar_random_basis,
    haar_random_state,
    permanent,
    qubit_basis,
    state_to_bloch,
)
from .posterior import MeasurementRecord, Prior, most_likely_state, normalized_state, unnormalized_moment
from .closedform import PauliCounts, closedform_moment
from .optimizer import (
    BasisCatalog,
    QubitScore,
    basis_score,
    local_pauli_catalog,
    optimize_from_catalog,
    optimize_qubit_basis,
    pauli_catalog,
)
from .simulator import Stopping, Strategy, StrategyKind, run_protocol, sample_outcome, scripted_trace
from .harness import ExperimentConfig, RunStatistics, massar_bound, run_experiment, write_csv, write_svg_plot
