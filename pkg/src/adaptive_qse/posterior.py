"""Bayesian posterior over pure states given a record of projective outcomes.

The unnormalized posterior moment after outcomes phi_1..phi_k is

    varrho_k = int dpsi  prod_m |<phi_m|psi>|^2  |psi><psi|

with dpsi the normalized Haar measure.  Its entries are bordered permanents
of the outcome Gram matrix, scaled by (d-1)!/(k+d)!.  Two exact evaluations
of those permanents are provided:

``"expansion"`` (default)
    Expands prod_m <phi_m|psi> in monomials of psi once per record and reads
    every entry off the coefficients; all terms in the final sum are
    non-negative on the diagonal, so there is no cancellation, and the cost is
    polynomial in k for fixed d.
``"ryser"``
    Builds each (k+1) x (k+1) bordered matrix and calls :func:`permanent`.
    Exponential in k and limited by :data:`~adaptive_qse.core.PERMANENT_CAP`.

For qubits ``"quadrature"`` routes to
:func:`adaptive_qse.closedform.quadrature_moment`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    PERMANENT_CAP,
    PermanentCapError,
    ValidationError,
    as_state,
    monomials,
    multiply_linear,
    permanent,
    top_eigenpair,
)

__all__ = [
    "Prior",
    "MeasurementRecord",
    "PosteriorMoment",
    "ENGINES",
    "PAULI_MATRICES",
    "unnormalized_moment",
    "normalized_state",
    "most_likely_state",
    "outcome_probability",
    "purity",
    "planar_posterior_density",
    "bloch_moments",
]

ENGINES = ("expansion", "ryser", "quadrature")
PLANAR_GRID_POINTS = 2048

PAULI_MATRICES = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class Prior(enum.Enum):
    """Prior density over emitted states.

    ``PLANAR_QUBIT`` is p(psi) ~ delta(theta - pi/2): the Bloch vector is known
    to lie in the x-y plane.
    """

    UNIFORM = "uniform"
    PLANAR_QUBIT = "planar-qubit"


class MeasurementRecord:
    """Ordered outcome states with an incrementally maintained Gram matrix.

    ``gram[i, j] = <phi_i|phi_j>``.  Appending an outcome costs k inner
    products plus one polynomial multiplication for the expansion engine;
    nothing already computed is recomputed.
    """

    def __init__(self, dim: int, outcomes: Iterable = (), prior: Prior = Prior.UNIFORM):
        if dim < 2:
            raise ValidationError("dimension must be at least 2")
        prior = Prior(prior)
        if prior is Prior.PLANAR_QUBIT and dim != 2:
            raise ValidationError("the planar prior is defined for qubits only")
        self.dim = int(dim)
        self.prior = prior
        self._outcomes: list[np.ndarray] = []
        self._gram = np.zeros((0, 0), dtype=complex)
        self._coeffs = np.ones(1, dtype=complex)
        for state in outcomes:
            self.append(state)

    @property
    def outcomes(self) -> tuple[np.ndarray, ...]:
        return tuple(self._outcomes)

    @property
    def gram(self) -> np.ndarray:
        view = self._gram.view()
        view.setflags(write=False)
        return view

    @property
    def coefficients(self) -> np.ndarray:
        """Monomial coefficients of prod_m <phi_m|psi> (degree k in psi)."""
        view = self._coeffs.view()
        view.setflags(write=False)
        return view

    def __len__(self) -> int:
        return len(self._outcomes)

    @property
    def k(self) -> int:
        return len(self._outcomes)

    def append(self, state) -> None:
        v = as_state(state)
        if v.size != self.dim:
            raise ValidationError(f"outcome has dimension {v.size}, record has {self.dim}")
        v = v.copy()
        v.setflags(write=False)
        k = len(self._outcomes)
        gram = np.empty((k + 1, k + 1), dtype=complex)
        gram[:k, :k] = self._gram
        if k:
            col = np.array([np.vdot(phi, v) for phi in self._outcomes])
            gram[:k, k] = col
            gram[k, :k] = col.conj()
        gram[k, k] = 1.0
        self._coeffs = multiply_linear(self._coeffs, self.dim, k, v.conj())
        self._gram = gram
        self._outcomes.append(v)

    def copy(self) -> "MeasurementRecord":
        other = MeasurementRecord.__new__(MeasurementRecord)
        other.dim = self.dim
        other.prior = self.prior
        other._outcomes = list(self._outcomes)
        other._gram = self._gram
        other._coeffs = self._coeffs
        return other

    def extended(self, state) -> "MeasurementRecord":
        """New record with one more (hypothetical) outcome; self is untouched."""
        other = self.copy()
        other.append(state)
        return other

    def __repr__(self) -> str:
        return f"MeasurementRecord(dim={self.dim}, k={self.k}, prior={self.prior.value})"


@dataclass(frozen=True)
class PosteriorMoment:
    """Unnormalized moment ``matrix`` with ``norm = trace(matrix)`` = int dP_k."""

    matrix: np.ndarray
    norm: float
    k: int

    @property
    def normalized(self) -> np.ndarray:
        return self.matrix / self.norm

    @property
    def top_eigenvalue(self) -> float:
        return top_eigenpair(self.matrix)[0]


def _moment_expansion(record: MeasurementRecord) -> np.ndarray:
    d, k = record.dim, record.k
    rm = monomials(d, k).raise_map
    weights = monomials(d, k + 1).haar_weight
    q = np.zeros((d, len(weights)), dtype=complex)
    for i in range(d):
        q[i, rm[i]] = record.coefficients
    return (q * weights) @ q.conj().T


def _moment_ryser(record: MeasurementRecord) -> np.ndarray:
    d, k = record.dim, record.k
    if k + 1 > PERMANENT_CAP:
        raise PermanentCapError(
            f"record of length {k} needs permanents of size {k + 1} > cap {PERMANENT_CAP}"
        )
    phis = np.array(record.outcomes).reshape(k, d)
    prefactor = math.exp(math.lgamma(d) - math.lgamma(k + d + 1))
    out = np.empty((d, d), dtype=complex)
    bordered = np.empty((k + 1, k + 1), dtype=complex)
    bordered[:k, :k] = record.gram
    for i in range(d):
        for j in range(i, d):
            bordered[:k, k] = phis[:, j].conj()  # <phi_m|z_j>
            bordered[k, :k] = phis[:, i]  # <z_i|phi_m>
            bordered[k, k] = 1.0 if i == j else 0.0
            out[i, j] = prefactor * permanent(bordered)
            out[j, i] = np.conj(out[i, j])
    return out


def _moment_planar(record: MeasurementRecord, n_points: int = PLANAR_GRID_POINTS) -> np.ndarray:
    phis = 2 * np.pi * np.arange(n_points) / n_points
    psi = np.stack([np.full(n_points, 1 / math.sqrt(2)), np.exp(1j * phis) / math.sqrt(2)])
    density = planar_posterior_density(record, phis)
    # uniform periodic grid: trapezoid rule == mean, exact for trig polynomials
    return (psi * density) @ psi.conj().T / n_points


def unnormalized_moment(
    record: MeasurementRecord, engine: str = "expansion", fallback: bool = False
) -> PosteriorMoment:
    """The moment varrho_k of ``record`` and its normalization int dP_k.

    With ``engine="ryser"`` a record longer than the permanent cap raises
    :class:`PermanentCapError`, unless ``fallback`` is set and the record is a
    qubit record, in which case quadrature is used.  Planar-prior records are
    always integrated on a 1-D grid.
    """
    if engine not in ENGINES:
        raise ValidationError(f"unknown engine {engine!r}; choose from {ENGINES}")
    if record.prior is Prior.PLANAR_QUBIT:
        matrix = _moment_planar(record)
    elif engine == "expansion":
        matrix = _moment_expansion(record)
    elif engine == "ryser" and not (fallback and record.dim == 2 and record.k + 1 > PERMANENT_CAP):
        matrix = _moment_ryser(record)
    else:
        from .closedform import quadrature_moment

        return quadrature_moment(record)
    matrix = (matrix + matrix.conj().T) / 2
    return PosteriorMoment(matrix, float(np.trace(matrix).real), record.k)


def normalized_state(record: MeasurementRecord, engine: str = "expansion") -> np.ndarray:
    """rho_k: the posterior mean of |psi><psi| (unit trace)."""
    return unnormalized_moment(record, engine).normalized


def most_likely_state(record: MeasurementRecord, engine: str = "expansion"):
    """Top eigenvector of rho_k and its eigenvalue (the average fidelity it achieves)."""
    lam, vec = top_eigenpair(normalized_state(record, engine))
    return vec, lam


def outcome_probability(record: MeasurementRecord, candidate, engine: str = "expansion") -> float:
    """Predictive probability <e|rho|e> that the next outcome is ``candidate``."""
    e = as_state(candidate)
    rho = normalized_state(record, engine)
    return float(min(max(np.vdot(e, rho @ e).real, 0.0), 1.0))


def purity(record: MeasurementRecord, engine: str = "expansion") -> float:
    rho = normalized_state(record, engine)
    return float(np.vdot(rho, rho).real)


def planar_posterior_density(record: MeasurementRecord, phi_grid: Sequence[float]) -> np.ndarray:
    """Unnormalized posterior density on the equator, prod_m |<phi_m|psi(pi/2, phi)>|^2."""
    if record.dim != 2 or record.prior is not Prior.PLANAR_QUBIT:
        raise ValidationError("planar density needs a qubit record with the planar prior")
    phis = np.asarray(phi_grid, dtype=float)
    psi = np.stack([np.full(phis.shape, 1 / math.sqrt(2)), np.exp(1j * phis) / math.sqrt(2)])
    density = np.ones(phis.shape)
    for phi_m in record.outcomes:
        density = density * np.abs(phi_m.conj() @ psi) ** 2
    return density


def bloch_moments(record: MeasurementRecord, engine: str = "expansion"):
    """Bloch-vector moments of the unnormalized qubit posterior.

    Returns ``(w0, w1, w2)`` with w0 = int dP, w1 = int dP r, w2 = int dP r r^T,
    r the Bloch vector of psi.  The second moments are read from moments of the
    record extended by the +x, +y, +z eigenstates, since
    varrho(S + {n}) has Bloch part (w1 + w2 n) / 4.
    """
    if record.dim != 2:
        raise ValidationError("Bloch moments are defined for qubits only")
    base = unnormalized_moment(record, engine).matrix
    w0 = float(np.trace(base).real)
    w1 = np.einsum("aij,ji->a", PAULI_MATRICES, base).real
    w2 = np.empty((3, 3))
    axis_states = [
        np.array([1, 1]) / math.sqrt(2),
        np.array([1, 1j]) / math.sqrt(2),
        np.array([1, 0]),
    ]
    for a, state in enumerate(axis_states):
        ext = unnormalized_moment(record.extended(state), engine).matrix
        w2[:, a] = 2 * np.einsum("bij,ji->b", PAULI_MATRICES, ext).real - w1
    w2 = (w2 + w2.T) / 2
    return w0, w1, w2

