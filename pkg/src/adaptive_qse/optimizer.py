"""Choice of the next measurement basis.

The score of a basis {e_1..e_d} after a record S is

    sum_n lambda_max( varrho(S + {e_n}) ) / int dP(S)

i.e. the average, over the predicted outcome, of the fidelity of the most
likely state after that outcome.  The best basis maximizes it.

For a qubit the score has a closed expression in the Bloch moments
(w0, w1, w2) of the current posterior.  With n the Bloch vector of e_1,

    score(n) = 1/2 + (|w1 + w2 n| + |w1 - w2 n|) / (4 w0)

so the continuous search only needs those moments, computed once per record.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .closedform import PauliCounts, closedform_bloch_moments
from .core import (
    DOWN,
    MINUS,
    MINUS_I,
    PLUS,
    PLUS_I,
    UP,
    MeasurementBasis,
    RandomSource,
    ValidationError,
    haar_random_state,
    qubit_basis,
    state_to_bloch,
    top_eigenpair,
)
from .posterior import MeasurementRecord, bloch_moments, unnormalized_moment

__all__ = [
    "CatalogKind",
    "BasisCatalog",
    "OptimizationReport",
    "QubitScore",
    "pauli_catalog",
    "local_pauli_catalog",
    "basis_score",
    "expected_fidelity",
    "ncg_maximize",
    "newton_polish",
    "optimize_qubit_basis",
    "optimize_from_catalog",
]

# Pauli-only records up to this length are scored through the closed form;
# beyond it the alternating binomial sums lose digits (see closedform).
CLOSEDFORM_ROUTE_MAX = 30


class CatalogKind(enum.Enum):
    PAULI_QUBIT = "pauli"
    LOCAL_PAULI_TWO_QUBIT = "local-pauli-2q"
    CUSTOM = "custom"


@dataclass(frozen=True)
class BasisCatalog:
    """Finite, ordered set of measurement bases sharing one dimension."""

    entries: tuple
    kind: CatalogKind = CatalogKind.CUSTOM

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValidationError("a basis catalog needs at least one entry")
        if len({b.dim for b in entries}) != 1:
            raise ValidationError("catalog entries must share one dimension")
        labels = [b.label for b in entries if b.label is not None]
        if len(labels) != len(set(labels)):
            raise ValidationError("catalog labels must be unique")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries[0].dim

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> MeasurementBasis:
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    @property
    def labels(self) -> list[Optional[str]]:
        return [b.label for b in self.entries]


_PAULI_BASES = {
    "Z": (UP, DOWN),
    "X": (PLUS, MINUS),
    "Y": (PLUS_I, MINUS_I),
}


def pauli_catalog() -> BasisCatalog:
    """The three Pauli eigenbases, in the order Z, X, Y."""
    return BasisCatalog(
        tuple(MeasurementBasis.from_states(v, label) for label, v in _PAULI_BASES.items()),
        CatalogKind.PAULI_QUBIT,
    )


def local_pauli_catalog() -> BasisCatalog:
    """The nine two-qubit product bases {X,Y,Z} x {X,Y,Z}, first qubit major.

    Vector ``2*a + b`` of entry ``PQ`` is e_a(P) (x) e_b(Q).
    """
    entries = []
    for first in "XYZ":
        for second in "XYZ":
            vecs = [np.kron(a, b) for a in _PAULI_BASES[first] for b in _PAULI_BASES[second]]
            entries.append(MeasurementBasis.from_states(vecs, first + second))
    return BasisCatalog(tuple(entries), CatalogKind.LOCAL_PAULI_TWO_QUBIT)


@dataclass
class OptimizationReport:
    best_basis: MeasurementBasis
    score: float
    restarts_used: int
    degenerate: bool
    per_candidate_scores: Optional[list[float]] = None
    best_index: Optional[int] = None
    angles: Optional[tuple[float, float]] = None
    converged: bool = True
    iterations: int = 0
    local_optima: list = field(default_factory=list, repr=False)


def basis_score(record: MeasurementRecord, basis: MeasurementBasis, engine: str = "expansion") -> float:
    """Sum of top eigenvalues of the d hypothetical moments, per unit int dP(record)."""
    if basis.dim != record.dim:
        raise ValidationError("basis and record dimensions differ")
    return _raw_score(record, basis, engine) / unnormalized_moment(record, engine).norm


def _raw_score(record: MeasurementRecord, basis: MeasurementBasis, engine: str) -> float:
    return sum(
        top_eigenpair(unnormalized_moment(record.extended(e), engine).matrix)[0] for e in basis
    )


def expected_fidelity(record: MeasurementRecord, basis: MeasurementBasis, engine: str = "expansion") -> float:
    """sum_n P(e_n | record) * lambda_max(rho(record + e_n)), written out term by term."""
    prior = unnormalized_moment(record, engine)
    rho = prior.normalized
    total = 0.0
    for e in basis:
        p = float(np.vdot(e, rho @ e).real)
        if p <= 0:
            continue
        total += p * top_eigenpair(unnormalized_moment(record.extended(e), engine).normalized)[0]
    return total


class QubitScore:
    """Basis score of a qubit record as a function of the first basis vector's Bloch direction."""

    def __init__(self, w0: float, w1, w2):
        if not w0 > 0:
            raise ValidationError("posterior normalization must be positive")
        self.w1 = tuple(float(x) / w0 for x in w1)
        self.w2 = tuple(tuple(float(x) / w0 for x in row) for row in w2)

    @classmethod
    def from_record(cls, record: MeasurementRecord, engine: str = "expansion") -> "QubitScore":
        counts = PauliCounts.from_record(record)
        if counts is not None and counts.total <= CLOSEDFORM_ROUTE_MAX:
            return cls(*closedform_bloch_moments(counts))
        return cls(*bloch_moments(record, engine))

    def __call__(self, n: Sequence[float]) -> float:
        (a0, a1, a2), w = self.w1, self.w2
        n0, n1, n2 = n
        b0 = w[0][0] * n0 + w[0][1] * n1 + w[0][2] * n2
        b1 = w[1][0] * n0 + w[1][1] * n1 + w[1][2] * n2
        b2 = w[2][0] * n0 + w[2][1] * n1 + w[2][2] * n2
        plus = math.sqrt((a0 + b0) ** 2 + (a1 + b1) ** 2 + (a2 + b2) ** 2)
        minus = math.sqrt((a0 - b0) ** 2 + (a1 - b1) ** 2 + (a2 - b2) ** 2)
        return 0.5 + 0.25 * (plus + minus)

    def at_angles(self, theta: float, phi: float) -> float:
        st = math.sin(theta)
        return self((st * math.cos(phi), st * math.sin(phi), math.cos(theta)))

    def of_basis(self, basis: MeasurementBasis) -> float:
        return self.at_angles(*state_to_bloch(basis[0]))


def _central_gradient(f: Callable, x: np.ndarray, step: float) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(len(x)):
        hi = x.copy()
        lo = x.copy()
        hi[i] += step
        lo[i] -= step
        g[i] = (f(hi) - f(lo)) / (2 * step)
    return g


def ncg_maximize(
    f: Callable[[np.ndarray], float],
    x0,
    grad_step: float = 1e-5,
    tol: float = 1e-7,
    max_iter: int = 200,
):
    """Polak-Ribiere (PR+) conjugate gradient ascent with finite-difference gradients.

    Line search: backtracking until the Armijo condition holds, then doubling
    while the objective keeps increasing.  Returns ``(x, f(x), iterations, converged)``.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = f(x)
    g = _central_gradient(f, x, grad_step)
    direction = g.copy()
    alpha = 1.0
    for it in range(max_iter):
        if np.linalg.norm(g) < tol:
            return x, fx, it, True
        slope = float(g @ direction)
        if slope <= 0:
            direction = g.copy()
            slope = float(g @ g)
        step = alpha
        while True:
            trial = x + step * direction
            f_trial = f(trial)
            if f_trial >= fx + 1e-4 * step * slope:
                break
            step *= 0.5
            if step * np.linalg.norm(direction) < 1e-14:
                return x, fx, it, False
        while True:
            longer = x + 2 * step * direction
            f_longer = f(longer)
            if f_longer <= f_trial:
                break
            step, trial, f_trial = 2 * step, longer, f_longer
        alpha = step
        x, fx = trial, f_trial
        g_new = _central_gradient(f, x, grad_step)
        beta = max(0.0, float(g_new @ (g_new - g)) / float(g @ g))
        direction = g_new + beta * direction
        g = g_new
    return x, fx, max_iter, bool(np.linalg.norm(g) < tol)


def newton_polish(f: Callable[[np.ndarray], float], x, steps: int = 3, h: float = 1e-4):
    """A few Newton ascent steps restricted to directions of negative curvature.

    Flat directions (a continuous family of optima) are left alone, so the
    step never wanders along a degenerate ridge.
    """
    x = np.asarray(x, dtype=float).copy()
    fx = f(x)
    n = len(x)
    for _ in range(steps):
        g = _central_gradient(f, x, 1e-5)
        hess = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                ei = np.eye(n)[i] * h
                ej = np.eye(n)[j] * h
                hess[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
        lam, vecs = np.linalg.eigh((hess + hess.T) / 2)
        curv_floor = 1e-6 * max(np.abs(lam).max(), 1e-12)
        step = np.zeros(n)
        for li, vi in zip(lam, vecs.T):
            if li < -curv_floor:
                step -= (vi @ g) / li * vi
        if not np.any(step):
            break
        trial = x + step
        f_trial = f(trial)
        if f_trial < fx - 1e-15:
            break
        x, fx = trial, f_trial
        if np.linalg.norm(step) < 1e-12:
            break
    return x, fx


def optimize_qubit_basis(
    record: MeasurementRecord,
    restarts: int = 8,
    seed_basis: Optional[MeasurementBasis] = None,
    rng: Optional[RandomSource] = None,
    engine: str = "expansion",
    grad_step: float = 1e-5,
    tol: float = 1e-7,
    max_iter: int = 200,
) -> OptimizationReport:
    """Best qubit basis by multi-start conjugate gradient over the Bloch angles.

    Starts are ``restarts`` Haar-random directions drawn from ``rng`` (seed 0
    when omitted), preceded by ``seed_basis`` when given.  The report is
    flagged degenerate when two starts reach the best score within 1e-8 at
    bases whose largest vector overlap differs from 1 by more than 1e-3.
    """
    if record.dim != 2:
        raise ValidationError("continuous basis optimization is implemented for qubits only")
    rng = rng if rng is not None else RandomSource(0)
    score = QubitScore.from_record(record, engine)

    def objective(x):
        return score.at_angles(x[0], x[1])

    starts = []
    if seed_basis is not None:
        starts.append(state_to_bloch(seed_basis[0]))
    for _ in range(restarts):
        starts.append(state_to_bloch(haar_random_state(2, rng)))

    optima = []
    iterations = 0
    all_converged = True
    for theta0, phi0 in starts:
        x, fx, its, ok = ncg_maximize(objective, (theta0, phi0), grad_step, tol, max_iter)
        x, fx = newton_polish(objective, x)
        iterations += its
        all_converged &= ok
        optima.append((fx, qubit_basis(x[0], x[1])))

    best_idx = max(range(len(optima)), key=lambda i: optima[i][0])
    best_score, best = optima[best_idx]
    degenerate = any(
        abs(fx - best_score) <= 1e-8 and 1 - best.max_overlap(b) > 1e-3 for fx, b in optima
    )
    return OptimizationReport(
        best_basis=best,
        score=score.of_basis(best),
        restarts_used=len(starts),
        degenerate=degenerate,
        angles=state_to_bloch(best[0]),
        converged=all_converged,
        iterations=iterations,
        local_optima=optima,
    )


def optimize_from_catalog(
    record: MeasurementRecord,
    catalog: BasisCatalog,
    engine: str = "expansion",
    tie_tol: float = 1e-10,
) -> OptimizationReport:
    """Highest-scoring catalog entry; scores within ``tie_tol`` go to the lowest index."""
    if not isinstance(catalog, BasisCatalog) or len(catalog) == 0:
        raise ValidationError("catalog must be a non-empty BasisCatalog")
    if catalog.dim != record.dim:
        raise ValidationError("catalog and record dimensions differ")
    if record.dim == 2:
        score = QubitScore.from_record(record, engine)
        scores = [score.of_basis(b) for b in catalog]
    else:
        scores = _catalog_scores(record, catalog, engine)
    top = max(scores)
    winners = [i for i, s in enumerate(scores) if s >= top - tie_tol * abs(top)]
    best = winners[0]
    return OptimizationReport(
        best_basis=catalog[best],
        score=scores[best],
        restarts_used=0,
        degenerate=len(winners) > 1,
        per_candidate_scores=scores,
        best_index=best,
    )


def _catalog_scores(record: MeasurementRecord, catalog: BasisCatalog, engine: str) -> list[float]:
    norm = unnormalized_moment(record, engine).norm
    return [_raw_score(record, basis, engine) / norm for basis in catalog]
