"""Closed-form qubit posteriors for records made only of Pauli eigenstates.

On the Bloch sphere the likelihood of m_1..m_6 outcomes up, down, +, -, +i, -i is

    2^-m (1+z)^m1 (1-z)^m2 (1+x)^m3 (1-x)^m4 (1+y)^m5 (1-y)^m6

with x = sin t cos p, y = sin t sin p, z = cos t.  Expanding the binomials
leaves monomials cos^a t sin^b t cos^c p sin^e p whose integrals are ratios of
Gamma functions, so every moment is a finite sum.  The Haar measure is
dpsi = sin t dt dp / 4 pi (total mass 1).

:func:`quadrature_moment` is the general-qubit fallback.  Gauss-Legendre in
cos t times a uniform grid in p integrates the polynomial likelihood exactly
once the grid exceeds half the record length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .core import PAULI_STATES, ValidationError
from .posterior import MeasurementRecord, PosteriorMoment, Prior

__all__ = [
    "CLOSEDFORM_MAX_TOTAL",
    "PauliCounts",
    "theta_integral",
    "phi_integral",
    "sphere_integral",
    "closedform_norm",
    "closedform_bloch_moments",
    "closedform_moment",
    "quadrature_moment",
]

CLOSEDFORM_MAX_TOTAL = 60


@dataclass(frozen=True)
class PauliCounts:
    """Multiplicities of the outcomes up, down, +, -, +i, -i."""

    up: int = 0
    down: int = 0
    plus: int = 0
    minus: int = 0
    plus_i: int = 0
    minus_i: int = 0

    def __post_init__(self):
        if any(int(c) != c or c < 0 for c in self.as_tuple()):
            raise ValidationError("Pauli counts must be non-negative integers")

    def as_tuple(self) -> tuple[int, int, int, int, int, int]:
        return (self.up, self.down, self.plus, self.minus, self.plus_i, self.minus_i)

    @property
    def total(self) -> int:
        return sum(self.as_tuple())

    def add(self, index: int, count: int = 1) -> "PauliCounts":
        c = list(self.as_tuple())
        c[index] += count
        return PauliCounts(*c)

    def states(self) -> list[np.ndarray]:
        """One outcome state per count, in the canonical order."""
        return [PAULI_STATES[i] for i, c in enumerate(self.as_tuple()) for _ in range(c)]

    def to_record(self) -> MeasurementRecord:
        return MeasurementRecord(2, self.states())

    @classmethod
    def from_record(cls, record: MeasurementRecord, tol: float = 1e-12) -> Optional["PauliCounts"]:
        """Counts for a uniform-prior qubit record of Pauli outcomes, else ``None``."""
        if record.dim != 2 or record.prior is not Prior.UNIFORM:
            return None
        counts = [0] * 6
        for phi in record.outcomes:
            for i, p in enumerate(PAULI_STATES):
                if abs(abs(np.vdot(p, phi)) ** 2 - 1) < tol:
                    counts[i] += 1
                    break
            else:
                return None
        return cls(*counts)


def _log_gamma_ratio(p: float, q: float) -> float:
    # log[ Gamma((1+p)/2) Gamma((1+q)/2) / Gamma((2+p+q)/2) ]
    return math.lgamma((1 + p) / 2) + math.lgamma((1 + q) / 2) - math.lgamma((2 + p + q) / 2)


def theta_integral(m: int, n: int) -> float:
    """int_0^pi cos^m t sin^n t dt."""
    if m % 2:
        return 0.0
    return math.exp(_log_gamma_ratio(m, n))


def phi_integral(m: int, n: int) -> float:
    """int_0^{2 pi} cos^m p sin^n p dp."""
    if m % 2 or n % 2:
        return 0.0
    return 2 * math.exp(_log_gamma_ratio(m, n))


@lru_cache(maxsize=None)
def _signed_binomial_poly(plus: int, minus: int) -> tuple[int, ...]:
    """Integer coefficients of (1+u)^plus (1-u)^minus, lowest degree first."""
    coeffs = [0] * (plus + minus + 1)
    for i in range(plus + 1):
        ci = math.comb(plus, i)
        for j in range(minus + 1):
            coeffs[i + j] += ci * math.comb(minus, j) * (-1) ** j
    return tuple(coeffs)


def sphere_integral(counts: PauliCounts, x_power: int = 0, y_power: int = 0, z_power: int = 0) -> float:
    """int dpsi L(psi) x^a y^b z^c for the Pauli-record likelihood L.

    The six binomial sums collapse to one sum per axis because each axis
    contributes a single polynomial; the surviving triple sum is accumulated
    with :func:`math.fsum` against alternating signs.
    """
    if counts.total > CLOSEDFORM_MAX_TOTAL:
        raise ValidationError(
            f"closed form limited to {CLOSEDFORM_MAX_TOTAL} outcomes, got {counts.total}"
        )
    m1, m2, m3, m4, m5, m6 = counts.as_tuple()
    cz = _signed_binomial_poly(m1, m2)
    cx = _signed_binomial_poly(m3, m4)
    cy = _signed_binomial_poly(m5, m6)
    log_scale = -counts.total * math.log(2) - math.log(4 * math.pi)
    terms = []
    for p, czp in enumerate(cz):
        if not czp or (p + z_power) % 2:
            continue
        for q, cxq in enumerate(cx):
            if not cxq or (q + x_power) % 2:
                continue
            for r, cyr in enumerate(cy):
                if not cyr or (r + y_power) % 2:
                    continue
                a, b, c = q + x_power, r + y_power, p + z_power
                # sin t appears to the power a + b, plus one for the Jacobian
                log_mag = _log_gamma_ratio(c, a + b + 1) + math.log(2) + _log_gamma_ratio(a, b)
                terms.append(czp * cxq * cyr * math.exp(log_mag + log_scale))
    return math.fsum(terms)


def closedform_norm(counts: PauliCounts) -> float:
    """int dP_k = int dpsi L(psi)."""
    return sphere_integral(counts)


def closedform_bloch_moments(counts: PauliCounts):
    """(w0, w1, w2): zeroth, first and second Bloch-vector moments of L."""
    w0 = sphere_integral(counts)
    unit = np.eye(3, dtype=int)
    w1 = np.array([sphere_integral(counts, *unit[a]) for a in range(3)])
    w2 = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            w2[a, b] = w2[b, a] = sphere_integral(counts, *(unit[a] + unit[b]))
    return w0, w1, w2


def closedform_moment(counts: PauliCounts) -> PosteriorMoment:
    """varrho_k = int dpsi L |psi><psi| with |psi><psi| = (I + r.sigma)/2."""
    w0 = sphere_integral(counts)
    x = sphere_integral(counts, 1, 0, 0)
    y = sphere_integral(counts, 0, 1, 0)
    z = sphere_integral(counts, 0, 0, 1)
    matrix = 0.5 * np.array([[w0 + z, x - 1j * y], [x + 1j * y, w0 - z]])
    return PosteriorMoment(matrix, float(w0), counts.total)


@lru_cache(maxsize=8)
def _qubit_grid(n_theta: int, n_phi: int):
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    p = 2 * np.pi * np.arange(n_phi) / n_phi
    uu, pp = np.meshgrid(u, p, indexing="ij")
    weights = np.outer(wu, np.full(n_phi, 2 * np.pi / n_phi)).ravel() / (4 * np.pi)
    half = np.arccos(uu.ravel()) / 2
    psi = np.stack([np.cos(half), np.exp(1j * pp.ravel()) * np.sin(half)])
    return psi, weights


def quadrature_moment(record: MeasurementRecord, grid: tuple[int, int] = (128, 256)) -> PosteriorMoment:
    """varrho_k by a Gauss-Legendre x uniform product rule on the Bloch sphere."""
    if record.dim != 2 or record.prior is not Prior.UNIFORM:
        raise ValidationError("quadrature_moment handles uniform-prior qubit records only")
    psi, weights = _qubit_grid(*grid)
    likelihood = weights.copy()
    for phi in record.outcomes:
        likelihood *= np.abs(phi.conj() @ psi) ** 2
    matrix = (psi * likelihood) @ psi.conj().T
    matrix = (matrix + matrix.conj().T) / 2
    return PosteriorMoment(matrix, float(np.trace(matrix).real), record.k)
